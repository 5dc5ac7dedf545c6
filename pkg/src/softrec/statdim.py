"""Statistical dimension of certificate cones for the nuclear norm.

Each cone C is generated by a compact slice M, C = {tau X : tau >= 0, X in M},
so dist(g, C)^2 = inf_tau dist(g, tau M)^2.  For every Gaussian sample the
inner projection onto tau M is computed (closed form for the exact cone,
Dykstra's algorithm for the soft cone) and the outer one-dimensional problem
is solved by golden-section search.  The estimate is

    delta_hat = d - mean_g inf_tau dist(g, tau M)^2.

Matrices are real and the ground truth is diag(sigma_1, ..., sigma_r, 0, ...),
which loses no generality because the Gaussian law is rotation invariant.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .exceptions import InfeasibleError, ParameterError, ValidationError
from .solvers import dense_svd

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# -- cone specifications --------------------------------------------------------

@dataclass(frozen=True)
class Soft:
    """Soft certificate cone with parameters (sigma, t) and singular values of the truth."""

    sigma: float
    t: float
    singular_values: tuple
    shape: tuple

    def __post_init__(self):
        sv = tuple(float(v) for v in np.atleast_1d(self.singular_values))
        object.__setattr__(self, "singular_values", sv)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.sigma < 1 or not (0 < self.t <= 1):
            raise ValidationError("soft cone needs sigma >= 1 and t in (0, 1]")
        if min(sv) < 0 or abs(sum(sv) - 1) > 1e-9:
            raise ValidationError("singular values must be nonnegative and sum to one")
        if len(sv) > min(self.shape):
            raise ValidationError("more singular values than the matrix shape allows")

    @property
    def rank(self):
        return len(self.singular_values)

    @property
    def ambient_dim(self):
        return self.shape[0] * self.shape[1]


@dataclass(frozen=True)
class Exact:
    """Cone generated by the nuclear-norm subdifferential at a rank-r matrix."""

    r: int
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if not 1 <= self.r <= min(self.shape):
            raise ValidationError("exact cone rank must satisfy 1 <= r <= min(k, n)")

    @property
    def ambient_dim(self):
        return self.shape[0] * self.shape[1]


@dataclass(frozen=True)
class Subspace:
    """Coordinate subspace of dimension ``dim`` in R^d."""

    dim: int
    d: int

    def __post_init__(self):
        if not 0 <= self.dim <= self.d:
            raise ValidationError("subspace dimension must lie in [0, d]")

    @property
    def ambient_dim(self):
        return self.d


@dataclass(frozen=True)
class Orthant:
    """Nonnegative orthant of R^d."""

    d: int

    @property
    def ambient_dim(self):
        return self.d


@dataclass(frozen=True)
class StatDimEstimate:
    delta_hat: float
    stderr: float
    samples: int
    complement: float
    values: np.ndarray = field(default=None, repr=False, compare=False)


# -- slice projections ----------------------------------------------------------

def _clip_spectrum(Y, rho):
    U, s, V = dense_svd(Y)
    return (U * np.minimum(s, rho)) @ V.T


def project_exact_slice(U, tau, r):
    """Projection onto tau M_exact: top-left block tau I_r, zero off-diagonal blocks,
    spectral norm of the trailing block at most tau."""
    if tau < 0:
        raise ParameterError("tau must be nonnegative")
    U = np.asarray(U, dtype=float)
    k, n = U.shape
    if not 1 <= r <= min(k, n):
        raise ValidationError(f"shape {U.shape} too small for rank {r}")
    X = np.zeros_like(U)
    X[:r, :r] = tau * np.eye(r)
    if r < min(k, n):
        X[r:, r:] = _clip_spectrum(U[r:, r:], tau) if tau > 0 else 0.0
    return X


def soft_cone_feasible(spec):
    """sigma_1 sigma + (sum_{i>=2} sigma_i)(1 - t) >= 1, i.e. the tau = 1 slice is nonempty."""
    sv = spec.singular_values
    return sv[0] * spec.sigma + sum(sv[1:]) * (1 - spec.t) >= 1 - 1e-12


def _proj_ball_zero_corner(Y, rho):
    """Nearest Z to Y (with Y[0, 0] = 0) subject to Z[0, 0] = 0 and ||Z||_2 <= rho.

    The optimality condition is Z = clip(Y + s E11) for a multiplier s with
    clip(Y + s E11)[0, 0] = 0; that entry is nondecreasing in s because
    projections are monotone, so s is found by bracketing and root finding.
    """
    if np.linalg.norm(Y, 2) <= rho:
        return Y.copy()
    if rho <= 0:
        return np.zeros_like(Y)
    E = np.zeros_like(Y)
    E[0, 0] = 1.0

    def f(s):
        return _clip_spectrum(Y + s * E, rho)[0, 0]

    f0 = f(0.0)
    if f0 == 0:
        return _clip_spectrum(Y, rho)
    step = max(rho, np.linalg.norm(Y, 2))
    sgn = -1.0 if f0 > 0 else 1.0
    a, b = 0.0, sgn * step
    fb = f(b)
    while fb * f0 > 0:
        a, b = b, 2 * b
        fb = f(b)
    s = brentq(f, min(a, b), max(a, b), xtol=1e-15 * (1 + abs(b)), rtol=4 * np.finfo(float).eps, maxiter=200)
    Z = _clip_spectrum(Y + s * E, rho)
    Z[0, 0] = 0.0
    return Z


def _soft_sets(tau, spec):
    sv = np.asarray(spec.singular_values)
    r = sv.size
    rho = tau * (1 - spec.t)
    cap = tau * spec.sigma
    nsv2 = float(sv @ sv)

    def p1(X):
        Y = X.copy()
        Y[0, 0] = min(Y[0, 0], cap)
        return Y

    def p2(X):
        d = np.diag(X)[:r]
        viol = tau - float(sv @ d)
        if viol <= 0:
            return X.copy()
        Y = X.copy()
        Y[np.arange(r), np.arange(r)] += viol * sv / nsv2
        return Y

    def p3(X):
        Y = X.copy()
        Y[0, 0] = 0.0
        Z = _proj_ball_zero_corner(Y, rho)
        Z[0, 0] = X[0, 0]
        return Z

    def violation(X):
        L = X.copy()
        L[0, 0] = 0.0
        return max(X[0, 0] - cap, tau - float(sv @ np.diag(X)[:r]), np.linalg.norm(L, 2) - rho, 0.0)

    return (p1, p2, p3), violation


@dataclass
class DykstraInfo:
    sweeps: int
    converged: bool
    violation: float
    dual_objective: list


def project_soft_slice(U, tau, spec, tol=1e-10, max_iter=20000, return_info=False):
    """Projection of ``U`` onto tau M_soft by Dykstra's algorithm.

    The three sets are {X11 <= tau sigma}, {sum_i sigma_i X_ii >= tau} and
    {||L(X)||_2 <= tau (1 - t)} with L zeroing the (1, 1) entry; each has an
    exact projection.  Iteration stops when a full sweep moves the iterate by
    at most ``tol`` in Frobenius norm and the constraint violation is at most
    ``tol``.

    Returns
    -------
    X : ndarray
    info : DykstraInfo, only if ``return_info``
        ``dual_objective`` holds the Dykstra dual value after each sweep,
        which is nondecreasing and converges to dist(U, tau M)^2 / 2.
    """
    if tau < 0:
        raise ParameterError("tau must be nonnegative")
    if not soft_cone_feasible(spec):
        raise InfeasibleError("soft slice is empty for these parameters", failed="slice")
    U = np.asarray(U, dtype=float)
    if U.shape != spec.shape:
        raise ValidationError(f"matrix shape {U.shape} differs from cone shape {spec.shape}")
    projs, violation = _soft_sets(tau, spec)
    x = U.copy()
    incs = [np.zeros_like(U) for _ in projs]
    supp = [0.0] * len(projs)
    hist = []
    half_u = 0.5 * float(np.sum(U * U))
    conv = False
    it = 0
    for it in range(1, max_iter + 1):
        x_old = x
        for i, P in enumerate(projs):
            w = x + incs[i]
            y = P(w)
            incs[i] = w - y
            supp[i] = float(np.sum(y * incs[i]))
            x = y
        hist.append(half_u - 0.5 * float(np.sum(x * x)) - sum(supp))
        if np.linalg.norm(x - x_old) <= tol and violation(x) <= tol:
            conv = True
            break
    if return_info:
        return x, DykstraInfo(it, conv, violation(x), hist)
    return x


def min_distance_over_tau(U, projector, bracket, tol=1e-6, max_iter=200):
    """Golden-section search for min over tau of ||U - projector(U, tau)||_F^2.

    Parameters
    ----------
    U : ndarray
    projector : callable
        (U, tau) -> projection of U onto tau M.
    bracket : (float, float)
    tol : float
        Final bracket width.

    Returns
    -------
    (tau_star, J_star) : the best evaluated point.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if hi < lo:
        raise ValidationError("bracket must satisfy lo <= hi")

    def J(tau):
        X = projector(U, tau)
        return float(np.sum((np.asarray(U) - X) ** 2))

    if hi - lo <= tol:
        return lo, J(lo)
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = J(c), J(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = J(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = J(d)
    pts = [(fc, c), (fd, d)]
    f, t = min(pts)
    return t, f


def _sample_dist2(spec, g, tol):
    if isinstance(spec, Subspace):
        return float(np.sum(g[spec.dim:] ** 2))
    if isinstance(spec, Orthant):
        return float(np.sum(np.minimum(g, 0.0) ** 2))
    U = g.reshape(spec.shape)
    nu = float(np.linalg.norm(U))
    if isinstance(spec, Exact):
        hi = nu / math.sqrt(spec.r)
        proj = lambda V, tau: project_exact_slice(V, tau, spec.r)
    else:
        hi = float(np.linalg.norm(spec.singular_values)) * nu
        proj = lambda V, tau: project_soft_slice(V, tau, spec, tol=tol * 1e-2)
    _, J = min_distance_over_tau(U, proj, (0.0, hi), tol=tol * max(hi, 1.0))
    return J


def estimate_statdim(spec, samples=25, seed=0, tol=1e-6):
    """Monte Carlo estimate of the statistical dimension of ``spec``.

    Each sample g is standard Gaussian in the ambient space, drawn from a
    generator seeded by (seed, sample index).  Subspaces and orthants use
    their closed-form projections; matrix cones go through the slice search.

    Returns
    -------
    StatDimEstimate
        ``delta_hat = d - mean dist^2`` with ``stderr = std/sqrt(samples)``,
        truncated at 0 since sampling noise can push the mean above d.
        An empty soft slice yields the trivial cone and delta_hat = 0.
    """
    if samples < 2:
        raise ParameterError("need at least two samples")
    d = spec.ambient_dim
    if isinstance(spec, Soft) and not soft_cone_feasible(spec):
        return StatDimEstimate(0.0, 0.0, samples, float(d), np.zeros(samples))
    vals = np.empty(samples)
    for i in range(samples):
        g = np.random.default_rng([seed, i]).standard_normal(d)
        vals[i] = _sample_dist2(spec, g, tol)
    mean = float(np.sum(vals)) / samples  # numpy uses pairwise summation
    std = float(np.std(vals, ddof=1))
    delta = max(d - mean, 0.0)
    return StatDimEstimate(delta, std / math.sqrt(samples), samples, d - delta, vals)


def reference_singular_values(r, s1=0.7):
    """sigma_1 = s1 and the remaining mass spread evenly over ranks 2..r."""
    if r == 1:
        return (1.0,)
    return (s1,) + tuple([(1 - s1) / (r - 1)] * (r - 1))


STATDIM_COLUMNS = ["rank", "sigma", "t", "t_over_sigma", "d_minus_delta", "stderr"]


def statdim_table(shape, ranks, sigmas, ts, samples=25, seed=0, s1=0.7, tol=1e-6, include_exact=True):
    """Rows (rank, sigma, t, t_over_sigma, d_minus_delta, stderr) for a plot of
    d - delta against t/sigma.  Exact-cone reference rows leave sigma, t and
    t_over_sigma empty."""
    rows = []
    d = shape[0] * shape[1]
    for r in ranks:
        sv = reference_singular_values(r, s1)
        for sg in sigmas:
            for t in ts:
                est = estimate_statdim(Soft(sg, t, sv, shape), samples, seed, tol)
                rows.append([r, sg, t, t / sg, d - est.delta_hat, est.stderr])
        if include_exact:
            est = estimate_statdim(Exact(r, shape), samples, seed, tol)
            rows.append([r, "", "", "", d - est.delta_hat, est.stderr])
    return rows
