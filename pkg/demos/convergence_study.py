"""Epsilon sweep on the lognormal test problem.

Runs the full MDFEM pipeline for each tolerance in ``test_problem.ini``,
compares against the tensor Gauss-Hermite reference and prints the fitted
error and cost slopes.  Takes roughly half a minute.

    python demos/convergence_study.py [config.ini]
"""

import sys
from pathlib import Path

from mdfem.allocate import exponents
from mdfem.cli import convergence_table
from mdfem.config import load_config

path = sys.argv[1] if len(sys.argv) > 1 else Path(__file__).with_name("test_problem.ini")
cfg = load_config(str(path))

text, info = convergence_table(cfg, cfg.experiment.epsilons)
print(text)

ex = exponents(cfg.rates.pstar, cfg.pde.tau, cfg.dprime)
print(f"practical constant c      = {info['c']:.4f}")
print(f"reference value           = {info['reference']:.12f}")
print(f"error slope vs 1/epsilon  = {info['err_slope']:.3f}   (model: -1)")
print(f"cost slope vs 1/epsilon   = {info['cost_slope']:.3f}   (model exponent {ex.a_MDFEM:.3f})")
