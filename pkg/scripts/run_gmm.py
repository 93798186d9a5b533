"""Gaussian-mixture posterior for the location: SGLD with quadratic polynomial fields.

Writes summary.csv, replicates.csv and acf.csv under results/gmm/.
"""
from _common import run

if __name__ == "__main__":
    run("gmm", 100, __doc__.splitlines()[0])
