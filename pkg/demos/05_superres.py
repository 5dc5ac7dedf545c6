#!/usr/bin/env python3
"""Soft super-resolution of two close spikes seen through a Gaussian filter.

A weak spike (weight 0.1) sits 3.95 filter widths from a strong one.  The
guarantee fixes the largest hump radius Delta around the weak spike within
which the recovered measure must put an atom.  The demo prints the
parameters, verifies the certificate built from a finite frame set and runs
grid total-variation recovery on a few trials.

Run:  python3 demos/05_superres.py   (under a minute)
"""
from softrec.superres import SuperresConfig, run_superres_experiment

cfg = SuperresConfig(N=512, trials=4, seed=7, max_iter=4000)
res = run_superres_experiment(cfg)
p = res["params"]
print(f"lambda = {p['lam']:.5f}, Delta = {p['delta'] / cfg.width:.3f} widths, frame set size {len(res['M'])}")
print(f"eps0 = {res['eps0']:.5f}")
for row, rep in zip(res["rows"], res["reports"]):
    c = rep["certificate"]
    print(f"trial {row[0]}: certified radius {c['radius']:.4f}, nearest recovered point "
          f"{row[3]:.3f} widths from the weak spike, solver converged {rep['converged']}")
print(f"certified {res['certified']}/{cfg.trials}, within Delta {res['recovered_within_delta']}/{cfg.trials}")
