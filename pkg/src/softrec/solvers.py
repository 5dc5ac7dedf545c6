"""Proximal operators and an equality-constrained ADMM solver.

The programs handled here all have the form

    minimize R(x)  subject to  A x = b

with R an l1, group l12 or nuclear norm on (possibly complex) coefficients.
Every returned result carries a certified duality gap: a dual feasible
multiplier is built from the iterate and its objective is subtracted from the
primal value, so the gap is an honest upper bound on suboptimality.

Inner products are linear in the first argument, <x, y> = y^H x, and complex
problems are equivalent to their realification under Re<., .>.  The solver
works with complex arithmetic directly; this is the same computation as on the
realified operator because the regularizers only see moduli.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import NumericError, ParameterError, ValidationError


# -- proximal maps --------------------------------------------------------------

def _check_theta(theta):
    if not np.isfinite(theta) or theta <= 0:
        raise ParameterError(f"prox parameter must be positive, got {theta}")


def prox_l1(c, theta):
    """Soft thresholding, sign(c) max(|c| - theta, 0), phase preserving.

    Parameters
    ----------
    c : array_like
        Real or complex coefficients.
    theta : float
        Threshold, must be positive.

    Returns
    -------
    ndarray
        Thresholded coefficients with the dtype of ``c``.
    """
    _check_theta(theta)
    c = np.asarray(c)
    mag = np.abs(c)
    scale = np.maximum(1.0 - theta / np.where(mag > 0, mag, 1.0), 0.0)
    return c * np.where(mag > theta, scale, 0.0)


def prox_group_l12(X, theta):
    """Block soft thresholding of the columns of ``X``.

    Each column X_i is mapped to X_i max(1 - theta/||X_i||_2, 0).
    """
    _check_theta(theta)
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    nrm = np.linalg.norm(X, axis=0)
    scale = np.where(nrm > theta, 1.0 - theta / np.where(nrm > 0, nrm, 1.0), 0.0)
    return X * scale


def dense_svd(X):
    """Thin SVD with X = U diag(S) V^H.

    Returns
    -------
    U, S, V : ndarray
        ``S`` is nonincreasing; ``V`` holds right singular vectors as columns.
    """
    X = np.asarray(X)
    if not np.all(np.isfinite(X)):
        raise NumericError("SVD of a matrix with non-finite entries")
    try:
        U, S, Vh = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError:
        # the divide-and-conquer driver can fail on rank-deficient input
        try:
            U, S, Vh = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericError(str(exc)) from exc
    return U, S, Vh.conj().T


def prox_nuclear(X, theta):
    """Singular value soft thresholding."""
    _check_theta(theta)
    U, S, V = dense_svd(X)
    S = np.maximum(S - theta, 0.0)
    return (U * S) @ V.conj().T


def power_iteration_norm(A, iters=50, rtol=1e-6, seed=0):
    """Estimate the spectral norm of ``A`` by power iteration on A^H A."""
    A = np.asarray(A)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A.conj().T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        new = np.sqrt(nw)
        v = w / nw
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return float(est)


# -- regularizers ---------------------------------------------------------------

class L1:
    """Sum of moduli of the coefficients."""

    kind = "L1"

    def size_ok(self, n):
        return True

    def value(self, x):
        return float(np.abs(x).sum())

    def prox(self, x, theta):
        return prox_l1(x, theta)

    def dual_norm(self, v):
        return float(np.abs(v).max()) if np.size(v) else 0.0

    def support(self, x, rel):
        a = np.abs(x)
        return a > rel * a.max() if a.size else a > 0

    def direction(self, x, mask):
        out = np.zeros_like(x)
        out[mask] = x[mask] / np.abs(x[mask])
        return out

    def to_json(self):
        return {"kind": self.kind}


class GroupL12:
    """Sum of Euclidean norms over a partition of the coefficients.

    Parameters
    ----------
    groups : array_like of int
        Group label of each coefficient.
    """

    kind = "GroupL12"

    def __init__(self, groups):
        g = np.asarray(groups)
        if g.ndim != 1 or g.size == 0:
            raise ValidationError("groups must be a nonempty 1-d label array")
        self.groups = g
        _, self._inv = np.unique(g, return_inverse=True)
        self._ng = int(self._inv.max()) + 1

    def size_ok(self, n):
        return n == self.groups.size

    def norms(self, x):
        return np.sqrt(np.bincount(self._inv, weights=np.abs(x) ** 2, minlength=self._ng))

    def value(self, x):
        return float(self.norms(x).sum())

    def prox(self, x, theta):
        _check_theta(theta)
        nrm = self.norms(x)
        scale = np.where(nrm > theta, 1.0 - theta / np.where(nrm > 0, nrm, 1.0), 0.0)
        return x * scale[self._inv]

    def dual_norm(self, v):
        return float(self.norms(v).max())

    def support(self, x, rel):
        nrm = self.norms(x)
        return (nrm > rel * nrm.max())[self._inv]

    def direction(self, x, mask):
        nrm = self.norms(x)[self._inv]
        out = np.zeros_like(x)
        out[mask] = x[mask] / nrm[mask]
        return out

    def to_json(self):
        return {"kind": self.kind, "groups": self.groups.tolist()}


class Nuclear:
    """Nuclear norm of the coefficient vector reshaped (row major) to ``shape``."""

    kind = "Nuclear"

    def __init__(self, shape):
        self.shape = tuple(int(s) for s in shape)
        if len(self.shape) != 2 or min(self.shape) < 1:
            raise ValidationError("nuclear shape must be (k, n) with k, n >= 1")

    def size_ok(self, n):
        return n == self.shape[0] * self.shape[1]

    def value(self, x):
        return float(np.linalg.svd(np.reshape(x, self.shape), compute_uv=False).sum())

    def prox(self, x, theta):
        return prox_nuclear(np.reshape(x, self.shape), theta).ravel()

    def dual_norm(self, v):
        return float(np.linalg.norm(np.reshape(v, self.shape), 2))

    support = None

    def to_json(self):
        return {"kind": self.kind, "shape": list(self.shape)}


def regularizer_from_json(d):
    kind = d.get("kind")
    if kind == "L1":
        return L1()
    if kind == "GroupL12":
        return GroupL12(d["groups"])
    if kind == "Nuclear":
        return Nuclear(d["shape"])
    raise ValidationError(f"unknown regularizer kind {kind!r}")


# -- problem and result ---------------------------------------------------------

@dataclass(frozen=True)
class EqualityConstrainedProblem:
    """minimize regularizer(x) subject to operator @ x = rhs."""

    operator: np.ndarray
    rhs: np.ndarray
    regularizer: object = field(default_factory=L1)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.operator))
        b = np.atleast_1d(np.asarray(self.rhs))
        if A.ndim != 2:
            raise ValidationError("operator must be a matrix")
        if b.shape != (A.shape[0],):
            raise ValidationError(f"rhs has shape {b.shape}, expected ({A.shape[0]},)")
        if not self.regularizer.size_ok(A.shape[1]):
            raise ValidationError("operator column count does not match the regularizer")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise NumericError("operator or rhs has non-finite entries")
        object.__setattr__(self, "operator", A)
        object.__setattr__(self, "rhs", b)

    def to_json(self):
        from ._io import complex_to_pairs
        return {"operator": complex_to_pairs(self.operator), "rhs": complex_to_pairs(self.rhs),
                "regularizer": self.regularizer.to_json()}

    @classmethod
    def from_json(cls, d):
        from ._io import pairs_to_complex
        return cls(pairs_to_complex(d["operator"]), pairs_to_complex(d["rhs"]),
                   regularizer_from_json(d["regularizer"]))


@dataclass
class SolveResult:
    """Outcome of :func:`solve_equality_constrained`.

    ``duality_gap`` is objective minus a certified dual value.  ``converged``
    is False when ``max_iter`` was hit; ``infeasible`` is True when the rhs is
    outside the range of the operator.  ``multiplier`` is the constraint
    multiplier lambda behind the gap; lambda / max(1, ||A^H lambda||_*) is dual
    feasible.  The returned coefficients may miss the constraint by
    ``residual_norm``, so ``objective`` can undercut the dual value by at most
    |<b - A x, lambda>| / max(1, ||A^H lambda||_*); ``duality_gap`` also
    covers the exactly feasible projection of the iterate and is never
    negative.
    """

    coefficients: np.ndarray
    objective: float
    residual_norm: float
    duality_gap: float
    iterations: int
    converged: bool = True
    infeasible: bool = False
    polished: bool = False
    multiplier: np.ndarray = None
    trace: list = None

    def to_json(self):
        from ._io import complex_to_pairs
        return {"coefficients": complex_to_pairs(self.coefficients), "objective": self.objective,
                "residual_norm": self.residual_norm, "duality_gap": self.duality_gap,
                "iterations": self.iterations, "converged": self.converged,
                "infeasible": self.infeasible, "polished": self.polished}

    @classmethod
    def from_json(cls, d):
        from ._io import pairs_to_complex
        return cls(pairs_to_complex(d["coefficients"]), d["objective"], d["residual_norm"],
                   d["duality_gap"], d["iterations"], d.get("converged", True),
                   d.get("infeasible", False), d.get("polished", False))

    def trace_csv(self, path=None):
        """CSV of (iteration, objective, residual, gap); needs ``trace=True`` at solve time."""
        from ._io import write_csv
        return write_csv(path, "solver-trace", ["iteration", "objective", "residual", "gap"],
                         self.trace or [])


# -- solver ---------------------------------------------------------------------

class _Affine:
    """Constraint A x = b compressed to the row space of A.

    With the thin SVD A = U S V^H and b in the range of A, the constraint is
    equivalent to Ac x = bc with Ac = S V^H and bc = U^H b, a system with as
    many rows as the rank.  Multipliers of the compressed system map back by
    lambda = U lambda_c, with the same dual value.
    """

    def __init__(self, A, b):
        U, s, V = dense_svd(A)
        Vh = V.conj().T
        keep = s > (s[0] if s.size else 0.0) * max(A.shape) * np.finfo(float).eps
        self.U, self.s, self.Vh = U[:, keep], s[keep], Vh[keep]
        self.V = self.Vh.conj().T.copy()
        self.b = b
        self.bc = self.U.conj().T @ b
        self.w = self.bc / self.s  # target for V^H x
        self.Ac = self.s[:, None] * self.Vh

    def pinv(self, r):
        return self.V @ ((self.U.conj().T @ r) / self.s)

    def proj(self, z):
        return z - self.V @ (self.Vh @ z - self.w)

    def residual(self, x):
        # equals ||A x - b|| for b in the range of A
        return float(np.linalg.norm(self.s * (self.Vh @ x - self.w)))

    def range_residual(self):
        return float(np.linalg.norm(self.b - self.U @ self.bc))

    def multiplier(self, nu):
        """Compressed lambda_c with Ac^H lambda_c = nu for nu in the row space."""
        return (self.Vh @ nu) / self.s

    def certify(self, reg, lam_c):
        """Dual value Re<bc, lam_c>/max(1, ||Ac^H lam_c||_*), a lower bound on the optimum."""
        dn = reg.dual_norm(self.V @ (self.s * lam_c))
        return float(np.real(np.vdot(lam_c, self.bc))) / max(1.0, dn)


def _polish(aff, reg, x, lam_c, rel=1e-7):
    """Re-solve on the estimated support and repair the multiplier there.

    Returns (x_polished, dual_value, lambda_c) or None when the support
    system is not uniquely solvable.
    """
    mask = reg.support(x, rel)
    k = int(mask.sum())
    A, b = aff.Ac, aff.bc
    if k == 0 or k > A.shape[0]:
        return None
    AS = A[:, mask]
    cS, _, rank, _ = np.linalg.lstsq(AS, b, rcond=None)
    if rank < k or np.linalg.norm(AS @ cS - b) > 1e-11 * (1 + np.linalg.norm(b)):
        return None
    xs = np.zeros_like(x)
    xs[mask] = cS
    if not np.all(reg.support(xs, 0.0)[mask]):
        return None
    g = reg.direction(xs, mask)[mask]
    ASh = AS.conj().T
    d = np.linalg.lstsq(ASh, g - ASh @ lam_c, rcond=None)[0]
    lam_p = lam_c + d
    return xs, aff.certify(reg, lam_p), lam_p


def solve_equality_constrained(problem, tol=1e-8, max_iter=20000, rho=None, polish=True,
                               trace=False, check_every=10, polish_every=50):
    """Minimize the problem's regularizer subject to its linear constraint.

    Scaled-form ADMM on the splitting x (prox of the regularizer) and z
    (exact projection onto the affine constraint set).  The scaled dual
    variable always lies in the row space of the operator, which yields a
    dual feasible multiplier after normalizing by the dual norm.  For the
    separable regularizers the iterate is periodically polished by solving on
    its support.

    Parameters
    ----------
    problem : EqualityConstrainedProblem
    tol : float
        Stop when residual <= tol (1 + ||b||) and gap <= tol (1 + objective).
    max_iter : int
    rho : float, optional
        Initial penalty; by default chosen from the least-norm solution.
    polish : bool
        Try support polishing for L1 and group regularizers.
    trace : bool
        Record (iteration, objective, residual, gap) at every check.

    Returns
    -------
    SolveResult
        The best certified iterate.  ``converged`` is False if ``max_iter``
        was reached first.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    reg = problem.regularizer
    A0, b0 = problem.operator, problem.rhs
    cplx = np.iscomplexobj(A0) or np.iscomplexobj(b0)
    dtype = complex if cplx else float
    # scale by the operator norm so the default penalty rule is scale free
    scale = power_iteration_norm(A0)
    N = A0.shape[1]
    nb0 = float(np.linalg.norm(b0))
    shape = getattr(reg, "shape", None)
    tr = [] if trace else None

    def finish(x, gap, it, conv, infeas=False, pol=False, lam=None):
        res = float(np.linalg.norm(A0 @ x - b0))
        coef = np.reshape(x, shape) if shape is not None else x
        return SolveResult(coef, reg.value(x), res, float(gap), int(it), conv, infeas, pol, lam, tr)

    if scale == 0 or nb0 == 0:
        x = np.zeros(N, dtype=dtype)
        if nb0 == 0:
            return finish(x, 0.0, 0, True, lam=np.zeros(A0.shape[0], dtype=dtype))
        return finish(x, np.inf, 0, False, infeas=True)
    A = (A0 / scale).astype(dtype)
    b = (b0 / scale).astype(dtype)
    nb = nb0 / scale
    aff = _Affine(A, b)
    if aff.range_residual() > max(tol, 1e-10) * (1 + nb):
        return finish(aff.pinv(b), np.inf, 0, False, infeas=True)

    def unscale(lam_c):
        # multiplier of the original system: A0^H (U lam_c / scale) = Ac^H lam_c
        return (aff.U @ lam_c) / scale

    xls = aff.pinv(b)
    if rho is None:
        rho = 1.0 / max(float(np.abs(xls).max()), 1e-300)
    z = xls.copy()
    u = np.zeros_like(z)
    # candidates (gap, point, lambda_c, polished): the sparse iterate x once
    # feasible, its projection z (always feasible) and polished points
    best = None
    fallback = None
    can_polish = polish and reg.support is not None
    next_polish, polish_gap = polish_every, polish_every
    k = 0
    for k in range(1, max_iter + 1):
        x = reg.prox(z - u, 1.0 / rho)
        zold = z
        z = aff.proj(x + u)
        u = u + x - z
        if k % check_every and k != max_iter:
            continue
        lam = aff.multiplier(-rho * u)
        dual = aff.certify(reg, lam)
        obj = reg.value(x)
        objz = reg.value(z)
        gap = max(obj, objz) - dual
        res = aff.residual(x)
        if tr is not None:
            tr.append((k, obj, res * scale, gap))
        if res <= tol * (1 + nb) and (best is None or gap < best[0]):
            best = (gap, x, lam, False)
        if fallback is None or objz - dual < fallback[0]:
            fallback = (objz - dual, z, lam, False)
        if can_polish and k >= next_polish:
            p = _polish(aff, reg, x, lam)
            if p is not None and reg.value(p[0]) - p[1] <= tol * (1 + reg.value(p[0])):
                best = (reg.value(p[0]) - p[1], p[0], p[2], True)
            elif p is not None and (fallback is None or reg.value(p[0]) - p[1] < fallback[0]):
                fallback = (reg.value(p[0]) - p[1], p[0], p[2], True)
            # back off while the support estimate is not usable
            polish_gap = polish_every if p is not None else min(2 * polish_gap, 16 * polish_every)
            next_polish = k + polish_gap
        if best is not None and best[0] <= tol * (1 + reg.value(best[1])):
            return finish(best[1], max(best[0], 0.0), k, True, pol=best[3], lam=unscale(best[2]))
        if k % 50 == 0:
            r = np.linalg.norm(x - z)
            s = rho * np.linalg.norm(z - zold)
            if r > 10 * s:
                rho *= 2.0
                u /= 2.0
            elif s > 10 * r:
                rho /= 2.0
                u *= 2.0
    cands = [c for c in (best, fallback) if c is not None]
    g, pt, lm, pol = min(cands, key=lambda c: c[0])
    return finish(pt, max(g, 0.0), k, False, pol=pol, lam=unscale(lm))
