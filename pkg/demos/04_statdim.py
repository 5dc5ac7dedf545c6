#!/usr/bin/env python3
"""How many measurements a soft guarantee needs, compared with exact recovery.

The statistical dimension of the certificate cone predicts the number of
Gaussian measurements needed.  Asking only for a small guaranteed radius
t/sigma enlarges the certificate cone and d - delta drops, below the value
for exact recovery at the smallest radii.  A 10 x 10 rank one target is
estimated with a few Monte Carlo samples per point.

Run:  python3 demos/04_statdim.py   (about half a minute)
"""
from softrec.statdim import statdim_table

rows = statdim_table((10, 10), ranks=[1], sigmas=[1.5], ts=[0.25, 0.5, 0.75, 0.95], samples=10, seed=0)
print(f"{'t/sigma':>8} {'d - delta':>10} {'stderr':>8}")
for r in rows:
    label = "exact" if r[1] == "" else f"{r[3]:.3f}"
    print(f"{label:>8} {r[4]:10.2f} {r[5]:8.2f}")
