"""Bayesian logistic regression on a synthetic dataset: SGLD-FP with constant fields.

Writes summary.csv, replicates.csv and acf.csv under results/logreg/.
"""
from _common import run

if __name__ == "__main__":
    run("logreg", 50, __doc__.splitlines()[0])
