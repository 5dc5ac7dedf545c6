#!/usr/bin/env python3
"""A soft recovery certificate, verified and then put to work.

The ground truth mu0 puts most of its mass on atom 0 and the rest on a few
other atoms.  From underdetermined measurements A D mu0 we build a dual
vector nu in the range of A^H, check the soft certificate conditions and
read the guaranteed radius.  Atomic norm minimization is then solved
numerically, and the recovered measure must contain an atom correlated with
phi_0 at least that strongly.

Run:  python3 demos/02_soft_recovery.py
"""
import numpy as np

from softrec.certificates import check_soft_conclusion, verify_soft_certificate
from softrec.dictionary import DiscreteMeasure, SampledDictionary, synthesize
from softrec.solvers import EqualityConstrainedProblem, solve_equality_constrained

rng = np.random.default_rng(3)
d, N, m = 6, 12, 4
G = rng.standard_normal((N, d))
dic = SampledDictionary(G / np.linalg.norm(G, axis=1, keepdims=True))
mu0 = DiscreteMeasure((0, 4, 9), [0.8, -0.12, 0.08])
A = rng.standard_normal((m, d))

# least-squares fit of phi_0 inside ran A^H, scaled so the correlation sum is one
p, *_ = np.linalg.lstsq(A.T, dic.atoms[0], rcond=None)
nu = A.T @ p
ip = dic.inner(nu)
nu = nu / sum(c * ip[k] for k, c in zip(mu0.support, mu0.weights))
rep = verify_soft_certificate(nu, 0, 1, mu0, dic)
print(f"certificate valid: {rep.valid}")
print(f"  sigma = {rep.sigma_min:.4f}, t = {rep.t_max:.4f}, guaranteed radius t/sigma = {rep.conclusion_radius:.4f}")

if rep.valid:
    res = solve_equality_constrained(EqualityConstrainedProblem(A @ dic.matrix, A @ synthesize(mu0, dic)), tol=1e-9)
    c = res.coefficients
    mu = DiscreteMeasure.from_coefficients(c, 1e-6 * np.abs(c).sum())
    print(f"solver converged: {res.converged}, duality gap {res.duality_gap:.1e}, support {mu.support}")
    ok, k = check_soft_conclusion(mu, 0, 1, rep.conclusion_radius * (1 - 1e-6), dic)
    corr = abs(dic.atoms[k] @ dic.atoms[0]) if k is not None else float("nan")
    print(f"conclusion holds: {ok}; witness atom {k} with |<phi_k, phi_0>| = {corr:.4f}")
