"""
Which confusion matrix sits behind a published metrics row?
===========================================================

The reported meta-model row is 78 / 70 / 91 / 79 percent with a diagnostic
odds ratio of 20, on a test set of roughly 72 patients. Enumerating every
integer confusion matrix of that size shows only one that reproduces all
five numbers under half-up rounding.
"""

import itertools

from hfstrat.metrics import ConfusionMatrix, MetricsReport

target = {"accuracy": 78, "precision": 70, "sensitivity": 91, "f1": 79}
hits = []
for total in range(70, 76):
    for pos in range(int(0.40 * total), int(0.50 * total) + 1):
        for tp, tn in itertools.product(range(pos + 1), range(total - pos + 1)):
            cm = ConfusionMatrix(tp, tn, total - pos - tn, pos - tp)
            if cm.tp == 0 or cm.fp * cm.fn == 0:
                continue
            rep = MetricsReport.from_confusion(cm)
            r = rep.rounded()
            if all(r[k] == v for k, v in target.items()) and abs(rep.dor - 20.0) < 0.05:
                hits.append(cm)

for cm in hits:
    print(cm, MetricsReport.from_confusion(cm).rounded())
