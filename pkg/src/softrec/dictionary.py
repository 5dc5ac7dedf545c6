"""Sampled dictionaries, discrete measures and atomic-norm evaluation.

A dictionary is a finite family of unit vectors (atoms) indexed by points of
an index space and labelled by subfamily.  Measures are finitely supported,
so the total variation norm is just the sum of moduli of the weights.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ._io import complex_to_pairs, pairs_to_complex
from .exceptions import InfeasibleError, InvalidMeasureError, NumericError, ValidationError

NORM_TOL = 1e-10
COARSE_PHASES = 64
MAX_CUTS = 100
CUT_TOL = 1e-9
LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True, eq=False)
class SampledDictionary:
    """Finite dictionary with atoms stored as rows.

    Parameters
    ----------
    atoms : array_like, shape (N, d)
        Unit-norm atoms, real or complex.
    index_points : array_like, shape (N,) or (N, p), optional
        Locations in the index space.  Defaults to 0..N-1.
    subfamily : array_like of int, shape (N,), optional
        Subfamily labels in 1..r.  Defaults to all ones.
    """

    atoms: np.ndarray
    index_points: np.ndarray = None
    subfamily: np.ndarray = None

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms))
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise ValidationError("need at least one atom of dimension >= 1")
        if not np.all(np.isfinite(atoms)):
            raise NumericError("atoms contain non-finite entries")
        n = atoms.shape[0]
        nrm = np.linalg.norm(atoms, axis=1)
        if np.any(np.abs(nrm - 1) > NORM_TOL):
            raise ValidationError(f"atoms must have unit norm (worst deviation {np.abs(nrm - 1).max():.2e})")
        pts = np.arange(n) if self.index_points is None else np.asarray(self.index_points)
        sub = np.ones(n, dtype=int) if self.subfamily is None else np.asarray(self.subfamily, dtype=int)
        if pts.shape[0] != n or sub.shape != (n,):
            raise ValidationError("index_points, atoms and subfamily must have equal length")
        if np.any(sub < 1):
            raise ValidationError("subfamily labels start at 1")
        atoms = atoms.copy()
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "index_points", pts)
        object.__setattr__(self, "subfamily", sub)

    @classmethod
    def from_columns(cls, M, normalize=False, **kw):
        """Build from a d x N matrix whose columns are the atoms."""
        M = np.asarray(M)
        if normalize:
            M = M / np.linalg.norm(M, axis=0)
        return cls(M.T, **kw)

    def __len__(self):
        return self.atoms.shape[0]

    @property
    def ambient_dim(self):
        return self.atoms.shape[1]

    @property
    def is_complex(self):
        return np.iscomplexobj(self.atoms)

    @property
    def matrix(self):
        """Synthesis matrix with the atoms as columns."""
        return self.atoms.T

    def members(self, j=None):
        """Indices of atoms in subfamily ``j`` (all atoms when ``j`` is None)."""
        if j is None:
            return np.arange(len(self))
        return np.flatnonzero(self.subfamily == j)

    def inner(self, v):
        """Vector of <v, phi_k> = phi_k^H v over all atoms."""
        return self.atoms.conj() @ np.asarray(v)

    def to_json(self):
        return {"atoms": complex_to_pairs(self.atoms), "index_points": np.asarray(self.index_points).tolist(),
                "subfamily": self.subfamily.tolist()}

    @classmethod
    def from_json(cls, d):
        return cls(pairs_to_complex(d["atoms"]), np.asarray(d["index_points"]), np.asarray(d["subfamily"]))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported measure: distinct support indices with complex weights."""

    support: tuple
    weights: np.ndarray

    def __post_init__(self):
        sup = tuple(int(s) for s in np.atleast_1d(np.asarray(self.support, dtype=int)))
        w = np.atleast_1d(np.asarray(self.weights)).astype(complex if np.iscomplexobj(self.weights) else float)
        if len(sup) != w.shape[0]:
            raise InvalidMeasureError("support and weights differ in length")
        if len(set(sup)) != len(sup):
            raise InvalidMeasureError("support entries must be distinct")
        w.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls):
        return cls((), np.zeros(0))

    @classmethod
    def from_coefficients(cls, c, threshold=0.0):
        """Measure with the entries of ``c`` whose modulus exceeds ``threshold``."""
        c = np.asarray(c).ravel()
        idx = np.flatnonzero(np.abs(c) > threshold)
        return cls(tuple(idx), c[idx])

    def tv(self):
        return float(np.abs(self.weights).sum())

    def dense(self, n):
        out = np.zeros(n, dtype=self.weights.dtype if self.weights.size else float)
        if self.support:
            if max(self.support) >= n or min(self.support) < 0:
                raise InvalidMeasureError("support index out of range")
            out[list(self.support)] = self.weights
        return out

    def to_json(self):
        return [{"index": s, "re": float(np.real(w)), "im": float(np.imag(w))}
                for s, w in zip(self.support, self.weights)]

    @classmethod
    def from_json(cls, items):
        if not items:
            return cls.empty()
        w = np.array([e["re"] + 1j * e["im"] for e in items])
        if np.all(w.imag == 0):
            w = w.real
        return cls(tuple(e["index"] for e in items), w)


@dataclass(frozen=True, eq=False)
class LiftedMeasure:
    """Nonnegative measure on index x phase pairs."""

    support: tuple
    phases: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        ph = np.atleast_1d(np.asarray(self.phases))
        sup = tuple(int(s) for s in self.support)
        if not (len(sup) == w.size == ph.size):
            raise ValidationError("lifted support, phases and weights differ in length")
        if np.any(w < 0):
            raise ValidationError("lifted weights must be nonnegative")
        if np.any(np.abs(np.abs(ph) - 1) > 1e-12):
            raise ValidationError("phases must be unimodular")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "weights", w)

    def tv(self):
        return float(self.weights.sum())


def synthesize(mu, dic):
    """Return the vector sum_k w_k phi_{x_k}."""
    if mu.support and (max(mu.support) >= len(dic) or min(mu.support) < 0):
        raise InvalidMeasureError("measure refers to atoms outside the dictionary")
    if not mu.support:
        return np.zeros(dic.ambient_dim, dtype=dic.atoms.dtype)
    return np.asarray(mu.weights) @ dic.atoms[list(mu.support)]


def lift_measure(mu):
    """Polar decomposition c = |c| (c/|c|) of every weight; zeros are dropped."""
    w = np.asarray(mu.weights)
    keep = np.abs(w) > 0
    sup = tuple(s for s, k in zip(mu.support, keep) if k)
    mag = np.abs(w[keep])
    return LiftedMeasure(sup, (w[keep] / mag).astype(complex) if mag.size else np.zeros(0, complex), mag)


def unlift_measure(lm):
    """Collapse a lifted measure back to complex weights on the index space."""
    acc = {}
    for s, p, w in zip(lm.support, lm.phases, lm.weights):
        acc[s] = acc.get(s, 0) + w * p
    sup = tuple(sorted(acc))
    w = np.array([acc[s] for s in sup], dtype=complex)
    if w.size and np.all(w.imag == 0):
        w = w.real
    return DiscreteMeasure(sup, w if w.size else np.zeros(0))


def dual_atomic_norm(v, dic, j=None):
    """max over atoms (of subfamily ``j`` if given) of |<v, phi>|."""
    idx = dic.members(j)
    if idx.size == 0:
        raise ValidationError(f"subfamily {j} is empty")
    return float(np.abs(dic.atoms[idx].conj() @ np.asarray(v)).max())


def _realify_columns(cols):
    return np.vstack([cols.real, cols.imag])


def _lp(M, v):
    res = linprog(np.ones(M.shape[1]), A_eq=M, b_eq=v, bounds=(0, None), method="highs", options=LP_OPTIONS)
    return res


def _gauge_complex(v, D):
    N = D.shape[1]
    step = 2 * np.pi / COARSE_PHASES
    col_k = np.repeat(np.arange(N), COARSE_PHASES)
    col_a = np.tile(np.arange(COARSE_PHASES) * step, N)
    vr = np.concatenate([v.real, v.imag])
    d = v.size
    for it in range(MAX_CUTS + 1):
        res = _lp(_realify_columns(D[:, col_k] * np.exp(1j * col_a)), vr)
        if res.status != 0:
            raise InfeasibleError("atomic norm LP failed: vector outside the span", failed="span")
        # the LP dual nu is feasible for the full phase circle iff |<nu, phi_k>| <= 1 for all k;
        # otherwise add the most violated phase of every offending atom
        y = res.eqlin.marginals
        z = (y[:d] - 1j * y[d:]) @ D
        bad = np.flatnonzero(np.abs(z) > 1 + CUT_TOL)
        if bad.size == 0 or it == MAX_CUTS:
            break
        col_k = np.concatenate([col_k, bad])
        col_a = np.concatenate([col_a, -np.angle(z[bad])])
    c = np.zeros(N, dtype=complex)
    np.add.at(c, col_k, res.x * np.exp(1j * col_a))
    return c


def gauge_atomic_norm(v, dic):
    """Atomic norm of ``v`` as a linear program over the extended dictionary.

    Real dictionaries use the atoms +phi and -phi.  Complex dictionaries
    start from 64 equally spaced phases per atom and then add cutting
    columns: while the LP dual nu has |<nu, phi_k>| > 1 for some atom, the
    phase attaining that modulus joins the program.  On exit nu is dual
    feasible for the whole phase circle up to 1e-9, so value / (1 + 1e-9)
    is a valid lower bound and the overestimate is at most about 1e-9
    relative.

    Returns
    -------
    value : float
        Total variation of the returned measure, an upper bound on the norm
        that is exact in the real case.
    measure : DiscreteMeasure
        Coefficients synthesizing ``v``.
    """
    v = np.asarray(v)
    D = dic.matrix
    if v.shape != (dic.ambient_dim,):
        raise ValidationError("vector dimension does not match the dictionary")
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0, DiscreteMeasure.empty()
    coef, *_ = np.linalg.lstsq(D, v, rcond=None)
    if np.linalg.norm(D @ coef - v) > 1e-8 * max(1.0, nv):
        raise InfeasibleError("vector lies outside the span of the atoms", failed="span")
    if dic.is_complex or np.iscomplexobj(v):
        c = _gauge_complex(v.astype(complex), D.astype(complex))
    else:
        res = _lp(np.hstack([D, -D]), v)
        if res.status != 0:
            raise InfeasibleError("atomic norm LP failed", failed="lp")
        N = D.shape[1]
        c = res.x[:N] - res.x[N:]
    c = np.where(np.abs(c) > 1e-13 * np.abs(c).max(), c, 0)
    mu = DiscreteMeasure.from_coefficients(c)
    return mu.tv(), mu


def solver_atomic_norm(v, dic, tol=1e-10, max_iter=20000):
    """Atomic norm through the proximal solver: min ||c||_1 subject to D c = v.

    Returns
    -------
    value : float
    result : SolveResult
    """
    from .solvers import EqualityConstrainedProblem, L1, solve_equality_constrained

    res = solve_equality_constrained(EqualityConstrainedProblem(dic.matrix, np.asarray(v), L1()),
                                     tol=tol, max_iter=max_iter)
    if res.infeasible:
        raise InfeasibleError("vector lies outside the span of the atoms", failed="span")
    return float(res.objective), res


def random_dictionary(rng, d, n_atoms, complex_atoms=False):
    """Dictionary of ``n_atoms`` uniformly random unit vectors in dimension ``d``."""
    G = rng.standard_normal((n_atoms, d))
    if complex_atoms:
        G = G + 1j * rng.standard_normal((n_atoms, d))
    return SampledDictionary(G / np.linalg.norm(G, axis=1, keepdims=True))


CROSSCHECK_COLUMNS = ["trial", "d", "atoms", "gauge", "solver", "abs_diff", "converged"]


def crosscheck_gauge_solver(trials=50, d=3, max_atoms=6, complex_atoms=False, seed=0, tol=1e-10):
    """Compare the LP gauge with the solver optimum on random small dictionaries.

    The atom count is drawn from [d, max_atoms] so every dictionary spans the
    space almost surely, and v is a standard Gaussian vector.
    """
    rows = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        n = int(rng.integers(d, max_atoms + 1))
        dic = random_dictionary(rng, d, n, complex_atoms)
        v = rng.standard_normal(d) + (1j * rng.standard_normal(d) if complex_atoms else 0)
        g, _ = gauge_atomic_norm(v, dic)
        s, res = solver_atomic_norm(v, dic, tol=tol)
        rows.append([t, d, n, g, s, abs(g - s), res.converged])
    return rows
