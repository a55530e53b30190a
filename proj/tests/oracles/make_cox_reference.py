"""Freezes statsmodels PHReg fits (Breslow ties) as Cox references.

Run from the repository root:  python3 tests/oracles/make_cox_reference.py
Writes tests/fixtures/cox_reference.json.
"""
import json

import numpy as np
import statsmodels
from statsmodels.duration.hazard_regression import PHReg

rng = np.random.default_rng(7)
cases = []
for i, (n, d, rounding) in enumerate([(40, 1, None), (120, 2, 0), (300, 3, 0), (500, 2, None)]):
    x = rng.normal(size=(n, d)) * np.linspace(1.0, 2.0, d)
    beta = np.linspace(0.8, -0.5, d)
    t = rng.exponential(scale=10.0 * np.exp(-x @ beta))
    c = rng.exponential(scale=15.0, size=n)
    dur = np.minimum(t, c)
    if rounding is not None:
        dur = np.maximum(np.round(dur, rounding), 1.0)  # ties
    event = (t <= c).astype(int)
    fit = PHReg(dur, x, status=event, ties="breslow").fit()
    cases.append({
        "name": f"cox_{i}",
        "x": x.tolist(),
        "duration": dur.tolist(),
        "event": event.tolist(),
        "beta": fit.params.tolist(),
        "loglike": float(fit.llf),
    })

with open("tests/fixtures/cox_reference.json", "w") as fh:
    json.dump({"generator": "statsmodels " + statsmodels.__version__, "cases": cases}, fh)
