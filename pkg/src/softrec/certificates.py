"""Soft and exact dual certificates.

A soft certificate is a vector nu in the range of the adjoint measurement map
that correlates with the data (the "Ankare" sum is at least one), is small on
the other subfamilies, and whose component orthogonal to the target atom has
dual norm at most 1 - t.  Every minimizer then contains an atom whose
correlation with the target atom is at least t/sigma.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ParameterError, ValidationError

STRICT = 1e-9


def realify(A):
    """Stack real and imaginary parts: the map h -> (Re Ah, Im Ah)."""
    A = np.asarray(A)
    return np.vstack([A.real, A.imag])


@dataclass(frozen=True)
class SoftCertificateReport:
    ankare_value: float
    other_subfamily_sup: float
    at_point: float
    orth_comp: float
    sigma_min: float
    t_max: float
    conclusion_radius: float
    ankare_ok: bool
    other_ok: bool
    orth_ok: bool

    @property
    def valid(self):
        return self.ankare_ok and self.other_ok and self.orth_ok

    def to_json(self):
        d = asdict(self)
        d["valid"] = self.valid
        return d


@dataclass(frozen=True)
class ExactCertificateReport:
    interpolation_error: float
    off_support_sup: float
    valid: bool
    detail: dict = None

    def to_json(self):
        return asdict(self)


def _check_index(dic, x0, j0):
    if not 0 <= int(x0) < len(dic):
        raise ValidationError(f"target index {x0} is not an atom of the dictionary")
    if int(dic.subfamily[x0]) != int(j0):
        raise ValidationError(f"atom {x0} belongs to subfamily {dic.subfamily[x0]}, not {j0}")


def verify_soft_certificate(nu, x0, j0, mu0, dic, tv_tol=1e-9):
    """Evaluate the four soft-certificate quantities for ``nu``.

    Parameters
    ----------
    nu : ndarray
        Candidate certificate in the ambient space.
    x0, j0 : int
        Target atom index and its subfamily label.
    mu0 : DiscreteMeasure
        Ground truth measure with unit total variation.
    dic : SampledDictionary

    Returns
    -------
    SoftCertificateReport
    """
    _check_index(dic, x0, j0)
    if abs(mu0.tv() - 1) > tv_tol:
        raise ValidationError(f"ground truth must have unit total variation, got {mu0.tv()}")
    nu = np.asarray(nu)
    ip = dic.inner(nu)  # <nu, phi_k>
    # <phi_k, nu> = conj(<nu, phi_k>)
    ankare = float(sum(np.real(c * np.conj(ip[k])) for k, c in zip(mu0.support, mu0.weights)))
    others = np.flatnonzero(dic.subfamily != j0)
    other = float(np.abs(ip[others]).max()) if others.size else 0.0
    phi0 = dic.atoms[x0]
    at_point = float(abs(ip[x0]))
    resid = nu - ip[x0] * phi0
    same = dic.members(j0)
    orth = float(np.abs(dic.atoms[same].conj() @ resid).max())
    t = 1.0 - orth
    sigma = at_point
    radius = t / sigma if sigma > 0 and orth < 1 else 0.0
    return SoftCertificateReport(ankare, other, at_point, orth, sigma, t, radius,
                                 ankare >= 1.0, other < 1.0 - STRICT, orth < 1.0)


def check_soft_conclusion(mu_star, x0, j0, radius, dic):
    """Does some support atom of subfamily ``j0`` correlate with atom ``x0`` at least ``radius``?

    Returns
    -------
    ok : bool
    witness : int or None
        Support atom maximizing |<phi, phi_x0>| within the subfamily.
    """
    if not 0 < radius <= 1:
        raise ParameterError("radius must lie in (0, 1]")
    if not mu_star.support:
        return False, None
    sup = np.array([s for s in mu_star.support if dic.subfamily[s] == j0], dtype=int)
    if sup.size == 0:
        return False, None
    corr = np.abs(dic.atoms[sup].conj() @ dic.atoms[x0])
    k = int(np.argmax(corr))
    return bool(corr[k] >= radius - 1e-9), int(sup[k])


def dual_program_value(p, A, b, dic, phases=64, tol=1e-9):
    """Objective and constraint value of the lifted dual program at ``p``.

    Parameters
    ----------
    p : ndarray, shape (2m,)
        Real dual variable paired with the realified data (Re b, Im b).
    A : ndarray, shape (m, d)
        Measurement operator on the ambient space.
    b : ndarray, shape (m,)
    dic : SampledDictionary
    phases : int or ndarray
        Number of equally spaced phases, or explicit unit phases.

    Returns
    -------
    value : float
        <(Re b, Im b), p>.
    sup : float
        max over atoms and sampled phases of Re(conj(w) <phi_x, nu>) with
        nu = A^H (p_re + i p_im).
    feasible : bool
    """
    A = np.atleast_2d(np.asarray(A))
    m = A.shape[0]
    p = np.asarray(p, dtype=float)
    b = np.asarray(b)
    if p.shape != (2 * m,) or b.shape != (m,) or A.shape[1] != dic.ambient_dim:
        raise ValidationError("dimension mismatch between p, A, b and the dictionary")
    om = np.exp(2j * np.pi * np.arange(phases) / phases) if np.isscalar(phases) else np.asarray(phases)
    nu = A.conj().T @ (p[:m] + 1j * p[m:])
    val = float(p @ np.concatenate([np.real(b), np.imag(b)]))
    corr = np.conj(dic.inner(nu))  # <phi_x, nu>
    sup = float(np.real(np.conj(om)[None, :] * corr[:, None]).max())
    return val, sup, bool(sup <= 1 + tol)


def verify_exact_nuclear_certificate(nu, U_r, V_r, tol=1e-9):
    """Check nu = sum_i v_i u_i^T + W with W in the orthogonal complement of the tangent space.

    ``U_r`` and ``V_r`` hold the singular vector families as columns; nu has
    shape (len(v_i), len(u_i)).  The interpolation error measures how far the
    tangent-space part of nu is from V U^H; the off-support value is the
    spectral norm of the complementary part W.
    """
    nu = np.asarray(nu)
    U = np.asarray(U_r).reshape(nu.shape[1], -1)
    V = np.asarray(V_r).reshape(nu.shape[0], -1)
    if U.shape[1] != V.shape[1]:
        raise ValidationError("factor ranks differ")
    for F in (U, V):
        if np.linalg.norm(F.conj().T @ F - np.eye(F.shape[1])) > 1e-8:
            raise ValidationError("factors must have orthonormal columns")
    Pv, Pu = V @ V.conj().T, U @ U.conj().T
    tangent = Pv @ nu + nu @ Pu - Pv @ nu @ Pu
    W = nu - tangent
    interp = float(np.linalg.norm(tangent - V @ U.conj().T, 2))
    wn = float(np.linalg.norm(W, 2)) if W.size else 0.0
    left = float(np.linalg.norm((nu - V @ U.conj().T) @ U, 2))
    right = float(np.linalg.norm(V.conj().T @ (nu - V @ U.conj().T), 2))
    return ExactCertificateReport(interp, wn, bool(interp <= tol and wn <= 1 + tol),
                                  {"annihilation_error": left, "range_error": right})


def _grid_index(grid, x):
    h = np.max(np.abs(np.diff(grid))) if grid.size > 1 else 1.0
    k = int(np.argmin(np.abs(grid - x)))
    if abs(grid[k] - x) > 1e-9 * h:
        raise ValidationError(f"support point {x} is not on the evaluation grid")
    return k


def verify_exact_superres_certificate(g, support, phases, grid, tol=1e-9):
    """Interpolation g(x) = c_x/|c_x| on the support and |g| <= 1 on the grid.

    Parameters
    ----------
    g : callable or ndarray
        Certificate values; a callable is evaluated on ``grid``.
    support : array_like
        Points of the spike train, all on ``grid``.
    phases : array_like
        Unit phases c_x/|c_x| at the support points.
    grid : ndarray
    """
    grid = np.asarray(grid, dtype=float)
    vals = np.asarray(g(grid) if callable(g) else g)
    if vals.shape != grid.shape:
        raise ValidationError("certificate samples and grid differ in shape")
    idx = [_grid_index(grid, x) for x in np.atleast_1d(support)]
    err = float(np.abs(vals[idx] - np.asarray(phases)).max()) if idx else 0.0
    sup = float(np.abs(vals).max())
    return ExactCertificateReport(err, sup, bool(err <= tol and sup <= 1 + tol))


def l12_condition_membership(V, eta, sigma, t, alpha, tol=1e-12):
    """Compare the soft group condition with the older cone-angle condition.

    Returns
    -------
    new_ok : bool
        |<V, eta>| <= sigma and the part of V orthogonal to eta has norm <= 1 - t.
    old_ok : bool
        ||V|| <= 1/cos(alpha) and the angle between V and eta is at most alpha.
    """
    if not 0 < alpha < np.pi / 2:
        raise ParameterError("alpha must lie in (0, pi/2)")
    V = np.asarray(V)
    eta = np.asarray(eta)
    if abs(np.linalg.norm(eta) - 1) > 1e-9:
        raise ValidationError("eta must be a unit vector")
    c = np.vdot(eta, V)  # <V, eta>
    perp = np.linalg.norm(V - c * eta)
    new_ok = abs(c) <= sigma + tol and perp <= 1 - t + tol
    nv = np.linalg.norm(V)
    if nv == 0:
        old_ok = True
    else:
        ang = np.arccos(np.clip(np.real(c) / nv, -1.0, 1.0))
        old_ok = nv <= 1 / np.cos(alpha) + tol and ang <= alpha + 1e-9
    return bool(new_ok), bool(old_ok)


def classical_separation_bounds(kappa):
    """Sparsity thresholds guaranteeing exact separation from coherence ``kappa``.

    Returns (0.5 (1/kappa + 1), (sqrt(2) - 1/2)/kappa).  Both grow like
    1/kappa, so tiny coherences give large finite values.
    """
    if not 0 < kappa <= 1:
        raise ParameterError("coherence must lie in (0, 1]")
    return 0.5 * (1.0 / kappa + 1.0), (np.sqrt(2.0) - 0.5) / kappa
