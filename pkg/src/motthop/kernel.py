"""Jump rates, conductances, and certified per-site jump laws.

From site i the walker jumps to site k with rate

    r_{i,k} = exp(-|x_i - x_k| + lam * (x_k - x_i) + u(E_i, E_k)),   r_{i,i} = 0,

where lam in (-1, 1) is the bias.  The symmetrized form

    c_{i,j} = exp(-|x_j - x_i| + lam * (x_i + x_j) + u(E_i, E_j)) = e^{2 lam x_i} r_{i,j}

is the conductance of the edge {i, j}; jump probabilities are the same whether
rows of r or rows of c are normalized, because the e^{2 lam x_i} factor cancels.

Rates are bounded above by e^{sup|u|}, so they are computed directly; only the
conductance gauge factor e^{2 lam x_i} can overflow, and the one place it
appears (``total_rate``) guards for it.  Truncation of the infinite jump range
is certified: the geometric gap floor d gives

    sum_{|k| > K} c_{0,k} <= 2 e^{2 sup|u|} e^{-(1-|lam|) d K} / (1 - e^{-(1-|lam|) d}),

and the adaptive radius grows until that bound is below tail_tol times the
retained mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericsError, WindowExceeded

__all__ = [
    "LAMBDA_MAX",
    "rate",
    "log_rate",
    "conductance",
    "log_conductance",
    "tail_bound",
    "JumpLaw",
    "jump_law",
    "total_rate",
    "local_drift",
    "DerivativeTables",
    "derivative_tables",
]

# Default cap on |lam| for jump-law construction.  The formulas make sense on
# all of (-1, 1) but tail certificates degenerate as |lam| -> 1, so anything
# past this needs an explicit opt-in via the lam_max argument.
LAMBDA_MAX = 0.9

_LOG_HUGE = 700.0  # exp() beyond this overflows float64


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not abs(lam) < 1.0:
        raise ConfigError(f"bias lam={lam} outside (-1, 1)")
    return lam


def log_rate(env, lam: float, i: int, k: int) -> float:
    """log r_{i,k}; -inf on the diagonal."""
    lam = _check_lam(lam)
    if i == k:
        return -math.inf
    dx = env.position(k) - env.position(i)
    return -abs(dx) + lam * dx + float(env.u(env.energy(i), env.energy(k)))


def rate(env, lam: float, i: int, k: int) -> float:
    lr = log_rate(env, lam, i, k)
    return 0.0 if lr == -math.inf else math.exp(lr)


def log_conductance(env, lam: float, i: int, j: int) -> float:
    """log c_{i,j}; -inf on the diagonal.  Symmetric in (i, j)."""
    lam = _check_lam(lam)
    if i == j:
        return -math.inf
    xi, xj = env.position(i), env.position(j)
    return -abs(xj - xi) + lam * (xi + xj) + float(env.u(env.energy(i), env.energy(j)))


def conductance(env, lam: float, i: int, j: int) -> float:
    lc = log_conductance(env, lam, i, j)
    return 0.0 if lc == -math.inf else math.exp(lc)


def tail_bound(d: float, lam: float, u_bound: float, K: int) -> float:
    """Certified upper bound on sum_{|k| > K} c_{0,k} (equivalently r_{0,k}).

    Uses only the gap floor d and the sup bound on u, so it is valid for every
    environment with those parameters.
    """
    lam = _check_lam(lam)
    if d <= 0 or K < 1:
        raise ConfigError("tail bound needs d > 0 and K >= 1")
    q = (1.0 - abs(lam)) * d
    return 2.0 * math.exp(2.0 * u_bound) * math.exp(-q * K) / (-math.expm1(-q))


@dataclass
class JumpLaw:
    """Normalized jump distribution out of one site, with a certified tail.

    offsets/probs/disp are aligned arrays over k in [-radius, radius] without
    0; ``disp`` holds the true displacements x_{i+k} - x_i.  ``pi`` is the
    rate normalization sum_k r_{i,i+k} over the retained range, and
    ``tail_mass`` bounds everything discarded (before renormalization).
    """

    center: int
    lam: float
    radius: int
    offsets: np.ndarray
    probs: np.ndarray
    disp: np.ndarray
    pi: float
    tail_mass: float
    _cdf: np.ndarray = field(default=None, repr=False)

    @property
    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            c = np.cumsum(self.probs)
            c /= c[-1]
            c[-1] = 1.0
            self._cdf = c
        return self._cdf

    def prob(self, k: int) -> float:
        """P(jump offset == k); zero outside the retained range and at 0."""
        if k == 0 or abs(k) > self.radius:
            return 0.0
        idx = k + self.radius if k < 0 else k + self.radius - 1
        return float(self.probs[idx])


def _raw_weights(env, lam: float, i: int, K: int):
    """Rates, displacements and offsets for k in [-K, K] minus the center."""
    pos, ener = env.arrays(i - K, i + K)
    dx = pos - pos[K]
    du = np.asarray(env.u(ener[K], ener), dtype=float)
    logw = -np.abs(dx) + lam * dx + du
    keep = np.ones(2 * K + 1, dtype=bool)
    keep[K] = False
    offsets = np.arange(-K, K + 1)[keep]
    return np.exp(logw[keep]), dx[keep], offsets


def jump_law(
    env,
    lam: float,
    i: int = 0,
    tail_tol: float = 1e-12,
    radius: int | None = None,
    lam_max: float = LAMBDA_MAX,
) -> JumpLaw:
    """Jump law out of site i with adaptively certified truncation.

    The radius doubles until the analytic tail bound drops below
    tail_tol times the retained rate mass; pass ``radius`` to pin it
    instead (used for finite-difference consistency checks where the
    support must not move between calls).
    """
    lam = _check_lam(lam)
    if abs(lam) > lam_max:
        raise ConfigError(f"|lam|={abs(lam)} exceeds lam_max={lam_max}")
    if tail_tol <= 0:
        raise ConfigError("tail_tol must be positive")

    if radius is not None:
        K = int(radius)
        if K < 1:
            raise ConfigError("radius must be >= 1")
        w, dx, offsets = _raw_weights(env, lam, i, K)
        tb = tail_bound(env.d, lam, env.u.bound, K)
    else:
        K = 4
        while True:
            try:
                w, dx, offsets = _raw_weights(env, lam, i, K)
            except WindowExceeded as exc:
                raise NumericsError(
                    f"tail_tol={tail_tol} unreachable inside window: site {i} "
                    f"needs radius {K}, coordinates [{exc.lo}, {exc.hi}]"
                ) from exc
            S = float(np.sum(w))
            tb = tail_bound(env.d, lam, env.u.bound, K)
            if tb <= tail_tol * S:
                break
            K *= 2

    S = float(np.sum(w))
    if not S > 0:
        raise NumericsError(f"zero rate mass at site {i}")
    return JumpLaw(
        center=i,
        lam=lam,
        radius=K,
        offsets=offsets,
        probs=w / S,
        disp=dx.copy(),
        pi=S,
        tail_mass=tb,
    )


def total_rate(env, lam: float, i: int = 0, tail_tol: float = 1e-12) -> float:
    """sum_{j != i} c_{i,j}, the conductance normalization at site i.

    Equals e^{2 lam x_i} times the rate normalization; at the origin (or at
    lam = 0) the two coincide.  Raises rather than overflowing when the gauge
    factor is too large, in which case work at the shifted origin instead.
    """
    law = jump_law(env, lam, i, tail_tol)
    log_total = 2.0 * lam * env.position(i) + math.log(law.pi)
    if log_total > _LOG_HUGE:
        raise NumericsError(
            f"conductance normalization at site {i} overflows "
            f"(log {log_total:.1f}); shift the origin to the site first"
        )
    return math.exp(log_total)


def local_drift(env, lam: float, i: int = 0, tail_tol: float = 1e-12) -> float:
    """Mean displacement of a single jump from site i: sum_k (x_{i+k} - x_i) p(k)."""
    law = jump_law(env, lam, i, tail_tol)
    return float(np.dot(law.probs, law.disp))


@dataclass
class DerivativeTables:
    """First and second lam-derivatives of the jump probabilities at one site.

    With phi the local drift and m2 the second displacement moment,

        d/dlam   p(k) = p(k) (x_k - phi)
        d2/dlam2 p(k) = p(k) (x_k^2 - 2 x_k phi + 2 phi^2 - m2)

    so both tables sum to zero.
    """

    law: JumpLaw
    drift: float
    second_moment: float
    dp: np.ndarray
    d2p: np.ndarray


def derivative_tables(
    env,
    lam: float,
    i: int = 0,
    tail_tol: float = 1e-12,
    radius: int | None = None,
) -> DerivativeTables:
    law = jump_law(env, lam, i, tail_tol, radius=radius)
    p, x = law.probs, law.disp
    phi = float(np.dot(p, x))
    m2 = float(np.dot(p, x * x))
    dp = p * (x - phi)
    d2p = p * (x * x - 2.0 * x * phi + 2.0 * phi * phi - m2)
    return DerivativeTables(law=law, drift=phi, second_moment=m2, dp=dp, d2p=d2p)
