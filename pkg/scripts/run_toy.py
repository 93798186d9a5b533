"""Toy two-lobed target in 2-d: ULA with a 5x5 RBF grid of vector fields.

Writes summary.csv, replicates.csv and acf.csv under results/toy/.
"""
from _common import run

if __name__ == "__main__":
    run("toy", 100, __doc__.splitlines()[0])
