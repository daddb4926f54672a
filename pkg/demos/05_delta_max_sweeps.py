"""Maximal strong-vs-weak discrepancies over coupling and bath frequency.

Uses the sweep runner of the command line tool, so the tables are the same
CSV the ``sbcthermo sweep`` subcommand writes.
"""

from __future__ import annotations

import argparse

import numpy as np

from sbcthermo.experiments import load_config, run_sweep

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--n-bath", type=int, default=4)
parser.add_argument("--steps", type=int, default=512)
parser.add_argument("--jobs", type=int, default=1)
args = parser.parse_args()

base = {"experiment": "sweep", "n_bath": args.n_bath, "steps": args.steps, "jobs": args.jobs}

g_sweep = run_sweep(load_config({**base, "sweep": {"variable": "g", "points": 9}}))
cols = g_sweep.data["columns"]
print("    g   dW_max   dQ_max   naive scalar   naive tpm")
for row in zip(*(cols[k] for k in list(cols)[:5])):
    print("{:5.3f} {:8.4f} {:8.4f} {:14.4f} {:11.4f}".format(*row))

w_sweep = run_sweep(load_config({**base, "g": 0.1, "sweep": {"variable": "omega_b", "points": 19}}))
cols = w_sweep.data["columns"]
dq = cols["delta_max_Q"]
second = np.abs(np.diff(dq, 2))
print("\nomega_b   dQ_max   d/domega_b")
for w, q, d in zip(cols["sweep_value"], dq, cols["d_delta_max_Q_d_omega_b"]):
    print(f"{w:7.2f} {q:8.5f} {d:11.5f}")
print(f"largest |second difference| at omega_b = {cols['sweep_value'][1:-1][second.argmax()]:.2f}")
