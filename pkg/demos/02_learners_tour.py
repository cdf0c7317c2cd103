"""
The four learners on one toy problem
====================================

Logistic regression, a CART tree, a random forest and an SMO-trained SVC,
all behind the same ``predict_label`` / ``predict_confidence`` contract.
"""

import numpy as np

from hfstrat.learners import ForestParams, TreeParams, train_forest, train_logistic, train_svc, train_tree

rng = np.random.default_rng(0)
X = rng.normal(size=(300, 4))
y = (X[:, 0] - 0.7 * X[:, 1] + 0.4 * rng.normal(size=300) > 0).astype(int)
X_train, X_test, y_train, y_test = X[:240], X[240:], y[:240], y[240:]

models = {
    "logistic": train_logistic(X_train, y_train, C=1.0),
    "tree": train_tree(X_train, y_train, TreeParams(max_depth=4)),
    "forest": train_forest(X_train, y_train, ForestParams(n_trees=50, max_depth=5), seed=1),
    "svc": train_svc(X_train, y_train, C=1.0, kernel="linear"),
}

for name, m in models.items():
    acc = np.mean(m.predict_label(X_test) == y_test)
    print(f"{name:<9} test accuracy {100 * acc:5.1f}%")

# logistic weights live in standardized units
print("logistic weights:", np.round(models["logistic"].weights, 3))

# forest confidence is the fraction of trees voting "1"
print("forest confidence, first 5 test rows:", models["forest"].predict_confidence(X_test[:5]))

# the SVC exposes a raw margin rather than a probability
print("svc margins, first 5 test rows:", np.round(models["svc"].decision_function(X_test[:5]), 3))
