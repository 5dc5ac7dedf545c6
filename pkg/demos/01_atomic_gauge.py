#!/usr/bin/env python3
"""Atomic norms of a finite dictionary, three ways.

For a dictionary of unit atoms phi_1..phi_N the atomic norm of v is the
smallest total variation of a measure that synthesizes v.  Here it is
computed by the linear program behind ``gauge_atomic_norm``, by the generic
ADMM solver and checked against a dual vector whose dual norm is one.

Run:  python3 demos/01_atomic_gauge.py
"""
import math

import numpy as np

from softrec.dictionary import (SampledDictionary, crosscheck_gauge_solver, dual_atomic_norm,
                                gauge_atomic_norm, solver_atomic_norm)

# the diagonal atom is cheaper than the two coordinate atoms
dic = SampledDictionary(np.array([[1, 0], [0, 1], [1 / math.sqrt(2), 1 / math.sqrt(2)]]))
v = np.array([1.0, 1.0])
val, mu = gauge_atomic_norm(v, dic)
print(f"gauge of (1, 1): {val:.12f}  (sqrt 2 = {math.sqrt(2):.12f}), support {mu.support}")

# weak duality: any nu with dual norm <= 1 gives <v, nu> <= ||v||_A
nu = v / math.sqrt(2)
print(f"dual norm of nu: {dual_atomic_norm(nu, dic):.12f}, lower bound <v, nu> = {v @ nu:.12f}")

rng = np.random.default_rng(0)
G = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
cdic = SampledDictionary(G / np.linalg.norm(G, axis=1, keepdims=True))
w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
g = gauge_atomic_norm(w, cdic)[0]
s = solver_atomic_norm(w, cdic)[0]
print(f"complex dictionary: LP {g:.10f}, ADMM {s:.10f}, difference {abs(g - s):.2e}")

rows = crosscheck_gauge_solver(trials=20, seed=1)
print(f"20 random real dictionaries: worst |LP - ADMM| = {max(r[5] for r in rows):.2e}")
