"""Exact computations for periodic environments.

A period-N environment folds the walk seen from the walker into an N-state
chain: state i is the environment shifted to point i, and a jump of offset k
moves the state to (i + k) mod N while the walker is displaced by
x_{i+k} - x_i.  Everything the infinite-volume theory defines becomes finite
linear algebra here:

* the environment chain P(i, j) = sum over offsets k = j - i mod N,
* its stationary law (at lam = 0 proportional to the rate normalization pi,
  with detailed balance),
* the generator L0 = P - I, resolvents, correctors, and H^{-1} norms,
* the drift phi(i) = expected single-jump displacement from state i,
* two independent routes to the diffusivity and to the derivative of
  stationary expectations at lam = 0, and the Einstein relation itself.

Displacements are tracked unfolded (true positions on the line), so periodic
environments whose shifts collide in law still carry the right geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import PeriodicEnvironment, reflect
from .errors import ConfigError, NumericsError
from .kernel import LAMBDA_MAX, jump_law, rate

__all__ = [
    "MAX_PERIOD",
    "ChainMatrices",
    "build_chain",
    "stationary",
    "reversible_law",
    "mean_pi",
    "exact_expectation",
    "exact_velocity",
    "exact_velocity_ct",
    "generator_matrix",
    "resolvent",
    "corrector_potential",
    "FormTable",
    "corrector_form",
    "gradient_form",
    "dirichlet_energy",
    "h_minus1_norm",
    "spectral_measure",
    "drift_vector",
    "DriftReport",
    "drift_in_h_minus1",
    "diffusion_variational",
    "diffusion_spectral",
    "SpectralReport",
    "derivative_two_ways",
    "EinsteinReport",
    "einstein_check",
    "rn_diagnostics",
    "RnDiagnostics",
    "continuity_scan",
    "slope_check",
]

MAX_PERIOD = 64
_MEAN_TOL = 1e-10


@dataclass
class ChainMatrices:
    """Folded environment chain plus unfolded displacement tables.

    probs[i, a] is the probability of offset offsets[a] out of state i,
    disp[i, a] the displacement x_{i+k} - x_i it causes, and pi[i] the rate
    normalization sum_k r_{i, i+k}.  All states share one certified radius so
    reversibility at lam = 0 is exact rather than truncated asymmetrically.
    """

    penv: PeriodicEnvironment
    lam: float
    tail_tol: float
    radius: int
    offsets: np.ndarray  # (noff,) ints, -K..-1, 1..K
    probs: np.ndarray  # (N, noff)
    disp: np.ndarray  # (N, noff)
    pi: np.ndarray  # (N,)
    P: np.ndarray  # (N, N) folded transition matrix

    @property
    def N(self) -> int:
        return len(self.pi)

    @property
    def fold(self) -> np.ndarray:
        """fold[i, a] = (i + offsets[a]) mod N, the landing state table."""
        return (np.arange(self.N)[:, None] + self.offsets[None, :]) % self.N

    def require_unbiased(self):
        if self.lam != 0.0:
            raise ConfigError(f"this operation needs the lam=0 chain, got lam={self.lam}")


def build_chain(
    penv: PeriodicEnvironment,
    lam: float,
    tail_tol: float = 1e-12,
    lam_max: float = LAMBDA_MAX,
) -> ChainMatrices:
    """Fold the environment chain of a period-N environment into matrices."""
    if not isinstance(penv, PeriodicEnvironment):
        raise ConfigError("build_chain needs a PeriodicEnvironment")
    n = penv.N
    if n > MAX_PERIOD:
        raise ConfigError(f"period {n} exceeds cap {MAX_PERIOD}")
    # One certified radius for all states keeps the folded chain exactly
    # reversible at lam = 0.
    radius = max(
        jump_law(penv, lam, i=i, tail_tol=tail_tol, lam_max=lam_max).radius
        for i in range(n)
    )
    noff = 2 * radius
    probs = np.empty((n, noff))
    disp = np.empty((n, noff))
    pi = np.empty(n)
    offsets = None
    for i in range(n):
        law = jump_law(penv, lam, i=i, tail_tol=tail_tol, radius=radius, lam_max=lam_max)
        probs[i] = law.probs
        disp[i] = law.disp
        pi[i] = law.pi
        offsets = law.offsets
    P = np.zeros((n, n))
    cols = (np.arange(n)[:, None] + offsets[None, :]) % n
    np.add.at(P, (np.repeat(np.arange(n), noff), cols.ravel()), probs.ravel())
    return ChainMatrices(
        penv=penv,
        lam=float(lam),
        tail_tol=tail_tol,
        radius=radius,
        offsets=offsets,
        probs=probs,
        disp=disp,
        pi=pi,
        P=P,
    )


def _solve_refined(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct solve plus one step of iterative refinement."""
    x = np.linalg.solve(A, b)
    x += np.linalg.solve(A, b - A @ x)
    return x


def stationary(chain: ChainMatrices, residual_tol: float = 1e-12) -> np.ndarray:
    """Stationary law of the folded chain, solved directly and verified.

    Raises if the fixed-point residual ||q P - q||_inf exceeds residual_tol
    or the solution is not strictly positive (non-irreducible input).
    """
    n = chain.N
    A = chain.P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    q = _solve_refined(A, b)
    res = float(np.max(np.abs(q @ chain.P - q)))
    if not np.all(q > 0):
        raise NumericsError("stationary law not strictly positive; chain not irreducible?")
    if res > residual_tol:
        raise NumericsError(f"stationary residual {res:.3e} exceeds {residual_tol:.1e}")
    return q


def reversible_law(chain: ChainMatrices) -> np.ndarray:
    """The lam = 0 stationary law, proportional to pi statewise."""
    chain.require_unbiased()
    return chain.pi / np.sum(chain.pi)


def mean_pi(chain: ChainMatrices) -> float:
    """Average of the rate normalization over shifts (the environment mean)."""
    return float(np.mean(chain.pi))


def exact_expectation(chain: ChainMatrices, f: np.ndarray) -> float:
    """Stationary expectation of the statewise observable f."""
    return float(stationary(chain) @ np.asarray(f, dtype=float))


def drift_vector(chain: ChainMatrices) -> np.ndarray:
    """Local drift phi(i) = sum_k disp(i,k) probs(i,k) per state."""
    return np.einsum("ia,ia->i", chain.probs, chain.disp)


def exact_velocity(penv: PeriodicEnvironment, lam: float, tail_tol: float = 1e-12) -> float:
    """Discrete-time velocity: stationary expectation of the local drift."""
    chain = build_chain(penv, lam, tail_tol)
    return float(stationary(chain) @ drift_vector(chain))


def exact_velocity_ct(penv: PeriodicEnvironment, lam: float, tail_tol: float = 1e-12) -> float:
    """Continuous-time velocity; the discrete one divided by E_stat[1/pi]."""
    chain = build_chain(penv, lam, tail_tol)
    q = stationary(chain)
    return float(q @ drift_vector(chain)) / float(q @ (1.0 / chain.pi))


# ---------------------------------------------------------------- generator


def generator_matrix(chain: ChainMatrices) -> np.ndarray:
    """L0 = P - I of the unbiased chain; -L0 is >= 0 self-adjoint under Q0."""
    chain.require_unbiased()
    return chain.P - np.eye(chain.N)


def _check_mean_zero(q0: np.ndarray, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    scale = max(1.0, float(np.max(np.abs(f))))
    m = float(q0 @ f)
    if abs(m) > _MEAN_TOL * scale:
        raise NumericsError(
            f"observable has nonzero stationary mean {m:.3e}; center it explicitly first"
        )
    return f


def resolvent(chain: ChainMatrices, f: np.ndarray, eps: float) -> np.ndarray:
    """Solve (eps - L0) g = f.  Positive definite for eps > 0, no mean condition."""
    chain.require_unbiased()
    if eps <= 0:
        raise ConfigError("resolvent needs eps > 0")
    A = (1.0 + eps) * np.eye(chain.N) - chain.P
    return _solve_refined(A, np.asarray(f, dtype=float))


def corrector_potential(chain: ChainMatrices, f: np.ndarray) -> np.ndarray:
    """The mean-zero solution g of (-L0) g = f, for Q0-mean-zero f.

    Solved as a bordered square system: the constraint row Q0 . g = 0 replaces
    the direction the singular operator cannot see.  Observables with nonzero
    stationary mean are rejected, not silently centered.
    """
    chain.require_unbiased()
    q0 = reversible_law(chain)
    f = _check_mean_zero(q0, f)
    n = chain.N
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = np.eye(n) - chain.P
    M[:n, n] = 1.0
    M[n, :n] = q0
    rhs = np.concatenate([f, [0.0]])
    sol = _solve_refined(M, rhs)
    return sol[:n]


@dataclass
class FormTable:
    """A function of (state, offset) with the stationary jump measure attached.

    weights[i, a] = Q0(i) probs(i, a) is the measure M; values[i, a] the
    function.  ``potential`` carries the state function the table was derived
    from when there is one.
    """

    offsets: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    potential: np.ndarray | None = None

    def norm_sq(self) -> float:
        return float(np.sum(self.weights * self.values**2))

    def integrate(self, other_values: np.ndarray) -> float:
        return float(np.sum(self.weights * self.values * other_values))


def gradient_form(chain: ChainMatrices, g: np.ndarray) -> FormTable:
    """The two-variable gradient (i, k) -> g((i+k) mod N) - g(i)."""
    chain.require_unbiased()
    g = np.asarray(g, dtype=float)
    q0 = reversible_law(chain)
    values = g[chain.fold] - g[:, None]
    return FormTable(
        offsets=chain.offsets,
        values=values,
        weights=q0[:, None] * chain.probs,
        potential=g,
    )


def corrector_form(chain: ChainMatrices, f: np.ndarray) -> FormTable:
    """Gradient of the corrector of f: the square-integrable field h^f."""
    return gradient_form(chain, corrector_potential(chain, f))


def dirichlet_energy(chain: ChainMatrices, g: np.ndarray) -> float:
    """||grad g||^2 under the jump measure; equals 2 <g, (-L0) g>_Q0."""
    return gradient_form(chain, g).norm_sq()


def h_minus1_norm(chain: ChainMatrices, f: np.ndarray, method: str = "solve") -> float:
    """||f||_{-1}: finite iff f has Q0 mean zero on an irreducible chain.

    method="solve" uses the corrector (<f, (-L0)^{-1} f>); method="spectral"
    sums coefficient weights over the spectrum of -L0 in the symmetrized
    geometry.  The two agree to solver precision and serve as mutual checks.
    """
    chain.require_unbiased()
    if method == "solve":
        q0 = reversible_law(chain)
        g = corrector_potential(chain, f)
        return math.sqrt(max(0.0, float(np.sum(q0 * np.asarray(f, float) * g))))
    if method == "spectral":
        mu, w = spectral_measure(chain, f)
        live = mu > 1e-12
        dead_weight = float(np.sum(w[~live]))
        if dead_weight > 1e-20 * max(1.0, float(np.sum(w))):
            raise NumericsError(
                f"spectral weight {dead_weight:.3e} at zero; f not mean-free"
            )
        return math.sqrt(float(np.sum(w[live] / mu[live])))
    raise ConfigError(f"unknown method {method!r}")


def spectral_measure(chain: ChainMatrices, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues mu_j of -L0 and weights |<e_j, f>|^2 in the Q0 geometry.

    The spectrum lies in [0, 2]; integrating 1/mu against the weights gives
    the squared H^{-1} norm.
    """
    chain.require_unbiased()
    q0 = reversible_law(chain)
    root = np.sqrt(q0)
    B = root[:, None] * (np.eye(chain.N) - chain.P) / root[None, :]
    B = 0.5 * (B + B.T)  # kill rounding asymmetry; exact by detailed balance
    mu, V = np.linalg.eigh(B)
    coef = V.T @ (root * np.asarray(f, dtype=float))
    return mu, coef**2


@dataclass
class DriftReport:
    norm_h_minus1: float
    norm_l2: float
    antisymmetry_residual: float
    mean: float


def drift_in_h_minus1(chain: ChainMatrices) -> DriftReport:
    """H^{-1} membership of the local drift, with the antisymmetry identity.

    The identity sum_k E[x_k c_{0,k} (g + g o tau_k)] = 0 (E uniform over
    shifts, any state function g) is what makes the drift mean-free and
    H^{-1}-finite; its residual with g the drift corrector is reported.
    """
    chain.require_unbiased()
    q0 = reversible_law(chain)
    phi = drift_vector(chain)
    mean = float(q0 @ phi)
    centered = phi - mean
    norm = h_minus1_norm(chain, centered)
    g = corrector_potential(chain, centered)
    # rates r(i,k) = pi[i] * probs[i,k]; test the shift antisymmetry with g
    r = chain.pi[:, None] * chain.probs
    lhs = float(np.sum(chain.disp * r * g[:, None])) / chain.N
    rhs = float(np.sum(chain.disp * r * g[chain.fold])) / chain.N
    scale = max(1.0, float(np.sum(np.abs(chain.disp) * r * np.abs(g)[:, None])) / chain.N)
    return DriftReport(
        norm_h_minus1=norm,
        norm_l2=math.sqrt(float(q0 @ phi**2)),
        antisymmetry_residual=abs(lhs + rhs) / scale,
        mean=mean,
    )


# ---------------------------------------------------------------- diffusivity


def diffusion_variational(penv: PeriodicEnvironment, tail_tol: float = 1e-12) -> float:
    """D as the minimum of E_M[(x_k + grad g)^2] over state functions g.

    Assembles the normal equations of the quadratic directly and evaluates
    the objective at the minimizer, an independent route from the spectral
    identity.
    """
    chain = build_chain(penv, 0.0, tail_tol)
    n = chain.N
    q0 = reversible_law(chain)
    M = q0[:, None] * chain.probs
    fold = chain.fold
    rows = np.repeat(np.arange(n), len(chain.offsets))
    land = fold.ravel()
    m = M.ravel()
    x = chain.disp.ravel()
    # Hessian of (1/2) sum M (x + g(land) - g(row))^2 and its linear term
    H = np.zeros((n, n))
    np.add.at(H, (land, land), m)
    np.add.at(H, (rows, rows), m)
    np.add.at(H, (land, rows), -m)
    np.add.at(H, (rows, land), -m)
    b = np.zeros(n)
    np.add.at(b, land, m * x)
    np.add.at(b, rows, -m * x)
    g, *_ = np.linalg.lstsq(H, -b, rcond=None)
    field = x + g[land] - g[rows]
    return float(np.sum(m * field**2))


def diffusion_spectral(
    penv: PeriodicEnvironment, tail_tol: float = 1e-12
) -> tuple[float, float]:
    """(D, D_ct) via the identity D = E_Q0[sum_k p x_k^2] - 2 ||phi||_{-1}^2.

    The continuous-time diffusivity rescales by the shift-average of the rate
    normalization: D_ct = mean(pi) * D.
    """
    chain = build_chain(penv, 0.0, tail_tol)
    q0 = reversible_law(chain)
    second = float(q0 @ np.einsum("ia,ia->i", chain.probs, chain.disp**2))
    phi = drift_vector(chain)
    mu, w = spectral_measure(chain, phi)
    live = mu > 1e-12
    h1sq = float(np.sum(w[live] / mu[live]))
    d_y = second - 2.0 * h1sq
    return d_y, mean_pi(chain) * d_y


# ---------------------------------------------------------------- derivatives


@dataclass
class SpectralReport:
    """Both routes to d/dlam E_lam[f] at lam = 0, with internal identities.

    sole  -- jump-measure form  E_M[(x_k - phi) h^f]
    luna  -- minus the Gaussian covariance of the (f, phi) sum pair,
             assembled from H^{-1} norms by polarization
    """

    sole: float
    luna: float
    covariance: float
    var_f: float
    var_phi: float
    h1sq_f: float
    h1sq_phi: float
    h1sq_sum: float
    inner_fphi: float
    ballo1_residual: float
    ballo2_residual: float

    @property
    def gap(self) -> float:
        return abs(self.sole - self.luna)


def derivative_two_ways(
    penv: PeriodicEnvironment,
    f: np.ndarray,
    tail_tol: float = 1e-12,
    agreement_tol: float = 1e-9,
) -> SpectralReport:
    chain = build_chain(penv, 0.0, tail_tol)
    q0 = reversible_law(chain)
    f = _check_mean_zero(q0, f)
    phi = drift_vector(chain)

    g_f = corrector_potential(chain, f)
    g_phi = corrector_potential(chain, phi)
    g_sum = corrector_potential(chain, f + phi)
    h1sq_f = float(q0 @ (f * g_f))
    h1sq_phi = float(q0 @ (phi * g_phi))
    h1sq_sum = float(q0 @ ((f + phi) * g_sum))
    inner = float(q0 @ (f * phi))

    M = q0[:, None] * chain.probs
    h_f = g_f[chain.fold] - g_f[:, None]
    sole = float(np.sum(M * (chain.disp - phi[:, None]) * h_f))

    covariance = h1sq_sum - h1sq_f - h1sq_phi - inner
    luna = -covariance
    var_f = 2.0 * h1sq_f - float(q0 @ f**2)
    var_phi = 2.0 * h1sq_phi - float(q0 @ phi**2)

    ballo1 = float(np.sum(M * phi[:, None] * h_f))
    ballo2 = -float(np.sum(M * chain.disp * h_f))
    scale = max(1.0, abs(sole), abs(luna))
    report = SpectralReport(
        sole=sole,
        luna=luna,
        covariance=covariance,
        var_f=var_f,
        var_phi=var_phi,
        h1sq_f=h1sq_f,
        h1sq_phi=h1sq_phi,
        h1sq_sum=h1sq_sum,
        inner_fphi=inner,
        ballo1_residual=abs(ballo1 + inner) / scale,
        ballo2_residual=abs(ballo2 - (h1sq_sum - h1sq_f - h1sq_phi)) / scale,
    )
    if report.gap > agreement_tol * scale:
        raise NumericsError(
            f"derivative routes disagree: sole={sole!r} luna={luna!r}"
        )
    if abs(covariance) > math.sqrt(max(var_f, 0.0) * max(var_phi, 0.0)) + 1e-9 * scale:
        raise NumericsError("covariance violates Cauchy-Schwarz against the variances")
    return report


# ---------------------------------------------------------------- Einstein


@dataclass
class EinsteinReport:
    h: float
    d_y: float
    d_ct: float
    fd_y: float
    fd_ct: float
    fd_y_half: float
    fd_ct_half: float

    @property
    def gap_y(self) -> float:
        return abs(self.fd_y - self.d_y)

    @property
    def gap_ct(self) -> float:
        return abs(self.fd_ct - self.d_ct)

    @property
    def richardson_y(self) -> float:
        return (4.0 * self.fd_y_half - self.fd_y) / 3.0

    @property
    def richardson_ct(self) -> float:
        return (4.0 * self.fd_ct_half - self.fd_ct) / 3.0


def _central_velocity_fd(penv, h, tail_tol, continuous):
    """Central difference of the velocity at lam = 0.

    Negative bias is evaluated by reflecting the environment: the walk under
    -h on penv is the space-mirror of the walk under +h on reflect(penv).
    """
    vel = exact_velocity_ct if continuous else exact_velocity
    v_plus = vel(penv, h, tail_tol)
    v_minus = -vel(reflect(penv), h, tail_tol)
    return (v_plus - v_minus) / (2.0 * h)


def einstein_check(
    penv: PeriodicEnvironment, h: float = 1e-3, tail_tol: float = 1e-12
) -> EinsteinReport:
    """Compare central-difference velocity slopes at lam = 0 to diffusivities."""
    if h <= 0 or h > 0.1:
        raise ConfigError("step h must lie in (0, 0.1]")
    d_y, d_ct = diffusion_spectral(penv, tail_tol)
    return EinsteinReport(
        h=h,
        d_y=d_y,
        d_ct=d_ct,
        fd_y=_central_velocity_fd(penv, h, tail_tol, False),
        fd_ct=_central_velocity_fd(penv, h, tail_tol, True),
        fd_y_half=_central_velocity_fd(penv, h / 2, tail_tol, False),
        fd_ct_half=_central_velocity_fd(penv, h / 2, tail_tol, True),
    )


# ---------------------------------------------------------------- densities


@dataclass
class RnDiagnostics:
    p: float
    conjugate_q: float
    rows: tuple  # (lam, lp_norm, sup_density, meta_sup)

    @property
    def sup_lp(self) -> float:
        return max(r[1] for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "conjugate_q": self.conjugate_q,
            "sup_lp": self.sup_lp,
            "rows": [
                {"lam": l, "lp_norm": n, "sup_density": s, "meta_sup": m}
                for (l, n, s, m) in self.rows
            ],
        }


def _weight_series(penv: PeriodicEnvironment, lam: float, i: int, rtol: float = 1e-12) -> float:
    """sum_{j >= 0} exp(-2 lam (x_{i+j} - x_i) + (1 - lam) Z_{i+j}), certified."""
    z_max = float(np.max(penv.gaps))
    x_i = penv.position(i)
    total, j = 0.0, 0
    while True:
        total += math.exp(
            -2.0 * lam * (penv.position(i + j) - x_i) + (1.0 - lam) * penv.gap(i + j)
        )
        j += 1
        # remaining terms are each <= e^{(1-lam) z_max} e^{-2 lam d j}
        tail = (
            math.exp((1.0 - lam) * z_max)
            * math.exp(-2.0 * lam * penv.d * j)
            / (-math.expm1(-2.0 * lam * penv.d))
        )
        if tail <= rtol * total:
            return total
        if j > 100_000:
            raise NumericsError(f"weight series did not certify at lam={lam}")


def rn_diagnostics(
    penv: PeriodicEnvironment,
    lam_grid,
    p: float = 2.0,
    tail_tol: float = 1e-12,
) -> RnDiagnostics:
    """Density of the biased stationary law against the unbiased one.

    Reports, per bias, the L^p(Q0) norm of dQ_lam/dQ0, its sup, and the sup
    of the density against the flat law divided by lam times the explicit
    boundary-weight series (an empirical stand-in for the domination
    constant; finite and stable is the point).
    """
    if p < 1:
        raise ConfigError("p must be >= 1")
    chain0 = build_chain(penv, 0.0, tail_tol)
    q0 = reversible_law(chain0)
    n = penv.N
    rows = []
    for lam in lam_grid:
        lam = float(lam)
        if not 0.0 < lam <= LAMBDA_MAX:
            raise ConfigError(f"density grid needs 0 < lam <= {LAMBDA_MAX}, got {lam}")
        q_lam = stationary(build_chain(penv, lam, tail_tol))
        dens = q_lam / q0
        lp = float(np.sum(q0 * dens**p) ** (1.0 / p))
        edge = np.array(
            [rate(penv, lam, i, i - 1) + rate(penv, lam, i, i + 1) for i in range(n)]
        )
        series = np.array([_weight_series(penv, lam, i) for i in range(n)])
        meta = float(np.max(n * q_lam / (lam * edge * series)))
        rows.append((lam, lp, float(np.max(dens)), meta))
    return RnDiagnostics(p=p, conjugate_q=p / (p - 1.0) if p > 1 else math.inf, rows=tuple(rows))


def continuity_scan(
    penv: PeriodicEnvironment,
    f: np.ndarray,
    lam_grid,
    tail_tol: float = 1e-12,
) -> list[tuple[float, float]]:
    """E_lam[f] along a bias grid (lam = 0 handled by the reversible law)."""
    f = np.asarray(f, dtype=float)
    out = []
    for lam in lam_grid:
        lam = float(lam)
        chain = build_chain(penv, lam, tail_tol)
        q = reversible_law(chain) if lam == 0.0 else stationary(chain)
        out.append((lam, float(q @ f)))
    return out


def slope_check(
    penv: PeriodicEnvironment,
    f: np.ndarray,
    step: float = 1e-3,
    tail_tol: float = 1e-12,
) -> tuple[float, float, float]:
    """(central-difference slope, exact derivative, relative gap) at lam = 0.

    The kernel is defined for either sign of the bias, so the symmetric
    difference costs nothing extra and drops the truncation error to
    O(step^2); a one-sided difference at this step is not reliably inside
    a percent-level tolerance on environments with strong curvature.
    """
    rows = continuity_scan(penv, f, [-step, step], tail_tol)
    slope = (rows[1][1] - rows[0][1]) / (2.0 * step)
    exact = derivative_two_ways(penv, f, tail_tol).sole
    denom = max(abs(exact), 1e-30)
    return slope, exact, abs(slope - exact) / denom
