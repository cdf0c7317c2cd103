"""Classifiers sharing a ``predict_label`` / ``predict_confidence`` contract."""
from .logistic import LogisticModel, logistic_gradient, logistic_objective, train_logistic
from .serialize import MODEL_FORMAT_VERSION, ModelFormatError, dump_model, load_model, model_from_dict, model_to_dict
from .svc import Kernel, SvcModel, kkt_report, smo_solve, train_svc
from .tree import (
    DecisionTreeModel,
    ForestParams,
    RandomForestModel,
    TreeParams,
    best_split,
    gini,
    train_forest,
    train_tree,
)
