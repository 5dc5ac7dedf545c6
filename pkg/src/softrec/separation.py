"""Component separation: incoherent bases, golfing certificates and experiments.

A signal x0 = Psi c1 + Theta c2 is observed through an isotropic random
measurement matrix.  Minimizing the l1 norm of the concatenated coefficients
finds the dominant coefficient c1[i0] once a dual vector nu with the
properties checked by :func:`verify_separation_conditions` exists.  That
vector is produced by a golfing iteration over r disjoint blocks of rows.

Phase convention: inner products are linear in the first argument, so the
target value of <nu, psi_i0> is omega * sigma_hat with omega = c1[i0]/|c1[i0]|.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._io import write_csv
from .dictionary import DiscreteMeasure, SampledDictionary
from .exceptions import ConfigError, InfeasibleError, ParameterError, ValidationError
from .solvers import EqualityConstrainedProblem, solve_equality_constrained

ENSEMBLES = ("random-orthonormal", "fourier", "identity")


def dft_basis(n):
    """Unitary DFT matrix whose columns are exp(2 pi i j k / n)/sqrt(n)."""
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def _check_orthonormal(B, name):
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValidationError(f"{name} must be a square matrix")
    if np.linalg.norm(B.conj().T @ B - np.eye(B.shape[0])) > 1e-9 * B.shape[0]:
        raise ValidationError(f"{name} is not orthonormal")
    return B


def mutual_coherence(Psi, Theta):
    """max_{i,j} |<psi_i, theta_j>| for two orthonormal bases."""
    Psi = _check_orthonormal(Psi, "Psi")
    Theta = _check_orthonormal(Theta, "Theta")
    return float(np.abs(Psi.conj().T @ Theta).max())


@dataclass(frozen=True, eq=False)
class SeparationInstance:
    """Two orthonormal bases and coefficients with ||c1||_1 + ||c2||_1 = 1."""

    Psi: np.ndarray
    Theta: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    i0: int
    kappa: float = field(init=False)

    def __post_init__(self):
        _check_orthonormal(self.Psi, "Psi")
        _check_orthonormal(self.Theta, "Theta")
        n = self.Psi.shape[0]
        if self.Theta.shape[0] != n or np.shape(self.c1) != (n,) or np.shape(self.c2) != (n,):
            raise ValidationError("bases and coefficient vectors must share dimension n")
        tv = np.abs(self.c1).sum() + np.abs(self.c2).sum()
        if abs(tv - 1) > 1e-9:
            raise ValidationError(f"coefficients must have unit l1 norm, got {tv}")
        if not (0 <= self.i0 < n) or self.c1[self.i0] == 0:
            raise ValidationError("i0 must index a nonzero entry of c1")
        object.__setattr__(self, "kappa", mutual_coherence(self.Psi, self.Theta))

    @property
    def n(self):
        return self.Psi.shape[0]

    @property
    def signal(self):
        return self.Psi @ self.c1 + self.Theta @ self.c2

    @property
    def c_abs(self):
        return float(abs(self.c1[self.i0]))

    @property
    def phase(self):
        return self.c1[self.i0] / abs(self.c1[self.i0])

    def dictionary(self):
        """Single-family dictionary with atoms psi_0..psi_{n-1}, theta_0..theta_{n-1}."""
        D = np.hstack([self.Psi, self.Theta]).astype(complex)
        return SampledDictionary(D.T)

    def measure(self):
        return DiscreteMeasure.from_coefficients(np.concatenate([self.c1, self.c2]).astype(complex))


def reference_profile(n, c_abs=0.5, i0=0, signs=None):
    """Dominant entry c_abs at i0, the rest spread evenly over both bases.

    The remaining mass 1 - c_abs is split in half between the other n - 1
    entries of c1 and all n entries of c2.  ``signs`` optionally multiplies
    entrywise (for example random unit phases).
    """
    rest = (1.0 - c_abs) / 2.0
    c1 = np.full(n, rest / (n - 1))
    c1[i0] = c_abs
    c2 = np.full(n, rest / n)
    c = np.concatenate([c1, c2]).astype(complex if signs is not None and np.iscomplexobj(signs) else float)
    if signs is not None:
        c = c * np.asarray(signs)
    return c[:n], c[n:]


def _ensemble_matrix(n, ensemble, rng):
    if ensemble == "identity":
        return np.eye(n)
    if ensemble == "fourier":
        return dft_basis(n).conj().T
    if ensemble == "random-orthonormal":
        Q, R = np.linalg.qr(rng.standard_normal((n, n)))
        return Q * np.sign(np.diag(R))
    raise ParameterError(f"unknown ensemble {ensemble!r}; expected one of {ENSEMBLES}")


def sample_isotropic_rows(n, m, ensemble="random-orthonormal", seed=0, bases=None,
                          block_size=None, replace=True):
    """Rows sqrt(n) * R[k, :] of a fixed orthonormal R with random k.

    Parameters
    ----------
    n, m : int
        Ambient dimension and number of rows.
    ensemble : str
        "random-orthonormal" (Haar orthogonal R drawn from ``seed``),
        "fourier" (DFT rows) or "identity" (standard basis rows).
    seed : int
    bases : list of ndarray, optional
        Orthonormal bases against which the incoherence M is measured; the
        standard basis by default.
    block_size : int, optional
        With ``replace=False`` rows are drawn without replacement inside each
        consecutive block of this size.  Blocks stay independent.
    replace : bool
        i.i.d. rows when True.

    Returns
    -------
    A : ndarray, shape (m, n)
    M : float
        max over rows X and basis elements b of |<b, X>|.
    """
    if m < 0:
        raise ParameterError("m must be nonnegative")
    rng = np.random.default_rng(seed)
    R = _ensemble_matrix(n, ensemble, rng)
    if replace:
        rows = rng.integers(0, n, size=m)
    else:
        p = block_size or m
        if p > n or m % p:
            raise ParameterError("block size must divide m and not exceed n when sampling without replacement")
        rows = np.concatenate([rng.choice(n, p, replace=False) for _ in range(m // p)]) if m else np.zeros(0, int)
    A = np.sqrt(n) * R[rows]
    if bases is None:
        bases = [np.eye(n)]
    M = max((float(np.abs(A @ B).max()) for B in bases), default=0.0) if m else 0.0
    return A, M


@dataclass(frozen=True)
class GolfingParameters:
    gamma: float
    s: float
    eps: float
    tau: float
    sigma_hat: float
    C_gamma: float
    r_min: int
    p_min: float
    omega: complex
    kappa: float
    c_abs: float

    @property
    def tau_star(self):
        return self.tau - self.kappa * self.sigma_hat - self.kappa * self.eps

    @property
    def radius(self):
        """Soft-recovery radius (1 - tau)/(sigma_hat + eps)."""
        return (1.0 - self.tau) / (self.sigma_hat + self.eps)

    def to_json(self):
        d = asdict(self)
        d["omega"] = [float(np.real(self.omega)), float(np.imag(self.omega))]
        return d


def choose_golfing_parameters(c_abs, kappa, gamma, M=1.0, n=None, r=None, delta=0.1,
                              const=8.0, phase=1.0):
    """Parameter choice for the golfing construction.

    s sits at the midpoint of gamma/16 <= s kappa/|c| <= gamma/12, eps = s/|c|,
    and (sigma_hat, tau) solve the linear pair

        |c| sigma_hat = 1 + (1 - |c|)(tau - kappa sigma_hat) + s
        tau = 1 - kappa sigma_hat - gamma/3.

    The +s term is what makes the Ankare sum reach exactly one after the
    eps loss at i0.

    Parameters
    ----------
    c_abs : float
        |c1[i0]|.
    kappa : float
        Mutual coherence.
    gamma : float
        Margin in 4 kappa/|c| <= 1 - gamma.
    M, n, r, delta : optional
        Incoherence, dimension, block count and failure probability entering
        p_min = const (C^2 M^2/kappa^2 + C (M^2 + kappa)/kappa) log(n r/delta).
        Without ``n`` the log factor is omitted.
    const : float
        Proportionality constant of the sample bound.
    phase : complex
        Unit phase c1[i0]/|c1[i0]|.
    """
    if not (0 < c_abs <= 1) or not (0 < kappa <= 1) or not (0 < gamma < 1):
        raise ParameterError("need 0 < |c| <= 1, 0 < kappa <= 1 and 0 < gamma < 1")
    if 4.0 * kappa / c_abs > 1.0 - gamma + 1e-12:
        raise InfeasibleError(f"coherence condition fails: 4 kappa/|c| = {4 * kappa / c_abs:.6g} > 1 - gamma",
                              failed="coherence")
    s = 7.0 * gamma * c_abs / (96.0 * kappa)
    eps = s / c_abs
    # unknowns (sigma_hat, tau)
    lhs = np.array([[c_abs + (1 - c_abs) * kappa, -(1 - c_abs)], [kappa, 1.0]])
    rhs = np.array([1.0 + s, 1.0 - gamma / 3.0])
    sigma_hat, tau = np.linalg.solve(lhs, rhs)
    C = (3.0 / gamma) * (1.0 - 2.0 * gamma / 3.0)
    r_min = int(math.ceil(math.log(8.0 / gamma)))
    logf = math.log((n * (r or r_min)) / delta) if n else 1.0
    p_min = const * (C ** 2 * M ** 2 / kappa ** 2 + C * (M ** 2 + kappa) / kappa) * logf
    return GolfingParameters(gamma, s, eps, float(tau), float(sigma_hat), C, r_min, p_min,
                             complex(phase), kappa, c_abs)


def golfing_certificate(A, i0, params, p, psi=None):
    """Golfing iteration on consecutive row blocks of size ``p``.

    nu^j = nu^{j-1} - (1/p) A_j^H A_j psi (<nu^{j-1}, psi> - omega sigma_hat)

    Returns
    -------
    nu : ndarray
    trace : list of float
        |<nu^j, psi> - omega sigma_hat| for j = 0..r.
    """
    A = np.atleast_2d(np.asarray(A))
    n = A.shape[1]
    if p <= 0:
        if A.shape[0]:
            raise ValidationError("block size must be positive")
        return np.zeros(n, complex), [abs(params.omega * params.sigma_hat)]
    if A.shape[0] % p:
        raise ValidationError(f"{A.shape[0]} rows do not split into blocks of {p}")
    if psi is None:
        psi = np.zeros(n)
        psi[i0] = 1.0
    target = params.omega * params.sigma_hat
    nu = np.zeros(n, complex)
    trace = [abs(target)]
    for j in range(A.shape[0] // p):
        Aj = A[j * p:(j + 1) * p]
        dev = np.vdot(psi, nu) - target
        nu = nu - (Aj.conj().T @ (Aj @ psi)) * (dev / p)
        trace.append(abs(np.vdot(psi, nu) - target))
    return nu, trace


@dataclass(frozen=True)
class SeparationReport:
    inoll: float
    inoll_slack: float
    off_max: float
    offbound_slack: float
    tau_slack: float

    @property
    def ok(self):
        return self.inoll_slack >= 0 and self.offbound_slack >= 0 and self.tau_slack > 0


def verify_separation_conditions(nu, instance, params):
    """Slacks of the three sufficient conditions (nonnegative means satisfied)."""
    nu = np.asarray(nu)
    D = np.hstack([instance.Psi, instance.Theta])
    ip = D.conj().T @ nu  # <nu, phi>
    i0 = instance.i0
    inoll = float(abs(ip[i0] - params.omega * params.sigma_hat))
    off = float(np.abs(np.delete(ip, i0)).max())
    return SeparationReport(inoll, params.eps - inoll, off, params.tau_star - off,
                            1.0 - params.kappa * params.sigma_hat - params.tau)


def best_s_term_error(c, s):
    """l1 distance from ``c`` to its best s-term approximation."""
    if s < 0:
        raise ParameterError("s must be nonnegative")
    a = np.sort(np.abs(np.asarray(c)).ravel())[::-1]
    return float(a[int(s):].sum())


@dataclass
class SeparationConfig:
    n: int = 256
    ensemble: str = "random-orthonormal"
    c_abs: float = 0.5
    i0: int = 0
    signs: str = "positive"
    gamma: float = 0.5
    r: int = 3
    p: object = "auto"
    trials: int = 20
    seed: int = 0
    sampling: str = "iid"
    delta: float = 0.1
    pmin_const: float = 8.0
    tol: float = 1e-8
    max_iter: int = 20000
    support_rel: float = 1e-5
    workers: int = 1

    def __post_init__(self):
        if self.ensemble not in ENSEMBLES:
            raise ConfigError(f"unknown ensemble {self.ensemble!r}")
        if self.sampling not in ("iid", "blocks"):
            raise ConfigError("sampling must be 'iid' or 'blocks'")
        if self.signs not in ("positive", "random"):
            raise ConfigError("signs must be 'positive' or 'random'")
        if self.n < 2 or self.trials < 0 or self.r < 0:
            raise ConfigError("need n >= 2, trials >= 0, r >= 0")
        if not (self.p == "auto" or (isinstance(self.p, int) and self.p >= 0)):
            raise ConfigError("p must be 'auto' or a nonnegative integer")


def basis_pair(n):
    """Spikes and the unitary DFT basis, coherence 1/sqrt(n)."""
    return np.eye(n), dft_basis(n)


def _trial(cfg, params, p, t):
    rng = np.random.default_rng([cfg.seed, t])
    Psi, Theta = basis_pair(cfg.n)
    signs = None
    if cfg.signs == "random":
        signs = rng.choice([-1.0, 1.0], size=2 * cfg.n)
    c1, c2 = reference_profile(cfg.n, cfg.c_abs, cfg.i0, signs)
    inst = SeparationInstance(Psi, Theta, c1, c2, cfg.i0)
    pr = GolfingParameters(**{**asdict(params), "omega": complex(inst.phase)})
    row = {"trial": t, "cert_ok": False, "inoll_slack": float("nan"), "offbound_slack": float("nan"),
           "recovered": False, "solver_gap": float("nan")}
    m = cfg.r * p
    if m == 0:
        return row
    seed = int(rng.integers(2 ** 63))
    A, _ = sample_isotropic_rows(cfg.n, m, cfg.ensemble, seed, block_size=p,
                                 replace=cfg.sampling == "iid")
    nu, _ = golfing_certificate(A, cfg.i0, pr, p)
    rep = verify_separation_conditions(nu, inst, pr)
    row.update(cert_ok=rep.ok, inoll_slack=rep.inoll_slack, offbound_slack=rep.offbound_slack)
    D = np.hstack([Psi, Theta])
    res = solve_equality_constrained(EqualityConstrainedProblem(A @ D, A @ inst.signal),
                                     tol=cfg.tol, max_iter=cfg.max_iter)
    row["solver_gap"] = res.duality_gap
    c = res.coefficients
    tv = np.abs(c).sum()
    row["recovered"] = bool(res.converged and abs(c[cfg.i0]) > cfg.support_rel * tv)
    return row


CSV_COLUMNS = ["trial", "cert_ok", "inoll_slack", "offbound_slack", "recovered", "solver_gap"]


def run_separation_experiment(config, csv_path=None):
    """Run independent certificate and recovery trials.

    Parameters
    ----------
    config : SeparationConfig or dict
    csv_path : str, optional
        Where to write the per-trial CSV.

    Returns
    -------
    dict
        ``rows`` (per-trial records), ``cert_rate``, ``recovery_rate``,
        ``implication_ok`` (every certified trial recovered i0), ``p``,
        ``params``.
    """
    cfg = config if isinstance(config, SeparationConfig) else SeparationConfig(**config)
    Psi, Theta = basis_pair(cfg.n)
    kappa = mutual_coherence(Psi, Theta)
    # incoherence over every row the ensemble can produce
    R = _ensemble_matrix(cfg.n, cfg.ensemble, np.random.default_rng(cfg.seed))
    M = float(max(np.abs(np.sqrt(cfg.n) * R @ B).max() for B in (Psi, Theta)))
    params = choose_golfing_parameters(cfg.c_abs, kappa, cfg.gamma, M=M, n=cfg.n, r=cfg.r,
                                       delta=cfg.delta, const=cfg.pmin_const)
    p = min(int(math.ceil(params.p_min)), cfg.n) if cfg.p == "auto" else int(cfg.p)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            rows = list(ex.map(lambda t: _trial(cfg, params, p, t), range(cfg.trials)))
    else:
        rows = [_trial(cfg, params, p, t) for t in range(cfg.trials)]
    rows.sort(key=lambda r: r["trial"])
    text = write_csv(csv_path, "separate", CSV_COLUMNS, rows)
    nt = max(len(rows), 1)
    return {"rows": rows, "csv": text, "p": p, "M": M, "params": params,
            "cert_rate": sum(r["cert_ok"] for r in rows) / nt,
            "recovery_rate": sum(r["recovered"] for r in rows) / nt,
            "implication_ok": all(r["recovered"] for r in rows if r["cert_ok"])}
