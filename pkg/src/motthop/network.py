"""Resistor-network computations for the range-truncated walk.

The truncated walk only crosses edges {i, j} with |i - j| <= rho, so its
potential theory is that of a banded resistor network on a window of sites.
Half-infinite blocks such as (-inf, 0] enter through a super-node collapse:
every window site past the boundary is merged into a single node carrying the
boundary condition.  Edges between merged sites drop out (no potential
difference), and because no edge is longer than rho, a window reaching rho
sites past the boundary captures every edge that matters; the collapse is
exact, not an approximation.  Free window ends, by contrast, are insulated
cuts, and their truncation error is what the window-sensitivity re-solve
measures.

Conductances carry the factor e^{2 lam x}, which outruns float range long
before the linear algebra gets into trouble.  Assembly therefore shifts all
edge weights by the maximum log conductance and restores the shift in the
reported value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, NumericsError
from .kernel import conductance
from .rng import spawn_generator
from .walk import LawCache

__all__ = [
    "FiniteChain",
    "ConductanceReport",
    "effective_conductance",
    "conductance_report",
    "nn_series",
    "reduce_chain",
    "hitting_probability",
    "expected_hitting_time",
    "DromedarioReport",
    "check_dromedario",
]

# direct sparse factorization up to this many free nodes, CG + Jacobi beyond
_DIRECT_LIMIT = 10_000
_LOG_HUGE = 700.0


def _dense_solve(K, rhs):
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"singular linear system: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericsError("linear system produced non-finite values; disconnected states?")
    return sol


# ------------------------------------------------------------ set selectors


def _resolve_sets(a_spec, b_spec, lo, hi, rho):
    """Expand A/B selectors to site arrays and validate window margins.

    A selector is an iterable of sites, a ray ("le", n) or ("ge", n), or a
    list of such pieces (union).  Rays must reach at least rho sites into the
    window so the collapse captures every edge crossing the boundary; finite
    sites need the same margin on both sides.
    """

    def expand(spec):
        if isinstance(spec, tuple) and len(spec) == 2 and spec[0] in ("le", "ge"):
            kind, n = spec
            n = int(n)
            if kind == "le":
                if lo > n - rho:
                    raise ConfigError(
                        f"window start {lo} leaves less than rho={rho} sites of the ray (-inf,{n}]"
                    )
                return np.arange(lo, n + 1)
            if hi < n + rho:
                raise ConfigError(
                    f"window end {hi} leaves less than rho={rho} sites of the ray [{n},inf)"
                )
            return np.arange(n, hi + 1)
        if isinstance(spec, list) and spec and isinstance(spec[0], tuple):
            return np.concatenate([expand(s) for s in spec])
        sites = np.asarray(sorted(int(s) for s in spec), dtype=int)
        if sites.size == 0:
            raise ConfigError("empty site set")
        if sites[0] - rho < lo or sites[-1] + rho > hi:
            raise ConfigError(
                f"sites {sites[0]}..{sites[-1]} need margin {rho} inside window [{lo}, {hi}]"
            )
        return sites

    a = expand(a_spec)
    b = expand(b_spec)
    if np.intersect1d(a, b).size:
        raise ConfigError("A and B must be disjoint")
    return a, b


def _log_edge_weights(env, lam, lo, hi, rho):
    """Per-offset log conductance bands over window sites lo..hi."""
    pos, ener = env.arrays(lo, hi)
    bands = []
    for o in range(1, rho + 1):
        if o >= len(pos):
            bands.append(np.empty(0))
            continue
        left, right = pos[:-o], pos[o:]
        logw = -(right - left) + lam * (left + right) + np.asarray(
            env.u(ener[:-o], ener[o:]), dtype=float
        )
        bands.append(logw)
    return bands


def _solve_network(env, lam, rho, a_spec, b_spec, window):
    lo, hi = int(window[0]), int(window[1])
    if rho < 1:
        raise ConfigError("rho must be >= 1")
    if hi <= lo:
        raise ConfigError("empty window")
    a_sites, b_sites = _resolve_sets(a_spec, b_spec, lo, hi, rho)

    n = hi - lo + 1
    gid = np.full(n, -1, dtype=int)
    gid[a_sites - lo] = 0
    gid[b_sites - lo] = 1
    free = np.nonzero(gid < 0)[0]
    gid[free] = 2 + np.arange(len(free))
    n_groups = 2 + len(free)

    bands = _log_edge_weights(env, lam, lo, hi, rho)
    shift = max((float(np.max(b)) for b in bands if b.size), default=0.0)

    rows, cols, vals = [], [], []
    for o, logw in enumerate(bands, start=1):
        if not logw.size:
            continue
        gi, gj = gid[: n - o], gid[o:]
        keep = gi != gj
        rows.append(gi[keep])
        cols.append(gj[keep])
        vals.append(np.exp(logw[keep] - shift))
    if not vals or all(v.size == 0 for v in vals):
        raise ConfigError("no edges between distinct nodes in the window")
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    W = sp.coo_matrix((vals, (rows, cols)), shape=(n_groups, n_groups)).tocsr()
    W = W + W.T

    f = np.zeros(n_groups)
    f[1] = 1.0
    if len(free):
        deg = np.asarray(W.sum(axis=1)).ravel()
        L = sp.diags(deg) - W
        K = L[2:, 2:].tocsr()
        rhs = np.asarray(W[2:, 1].todense()).ravel()
        if len(free) <= _DIRECT_LIMIT:
            sol = spla.spsolve(K.tocsc(), rhs)
        else:
            jacobi = sp.diags(1.0 / K.diagonal())
            sol, info = spla.cg(K, rhs, rtol=1e-12, atol=0.0, M=jacobi)
            if info != 0:
                raise NumericsError(f"conjugate gradient did not converge (info={info})")
        if not np.all(np.isfinite(sol)):
            raise NumericsError("singular network: A and B disconnected in the window")
        resid = float(np.max(np.abs(K @ sol - rhs)))
        if resid > 1e-10 * max(1.0, float(np.max(np.abs(rhs)))):
            raise NumericsError(f"harmonic residual {resid:.3e} too large")
        f[2:] = sol

    # flux out of B, and the Dirichlet energy as an internal cross-check
    flux = float((W @ (1.0 - f))[1])
    Wc = W.tocoo()
    energy = 0.5 * float(np.sum(Wc.data * (f[Wc.row] - f[Wc.col]) ** 2))
    if abs(energy - flux) > 1e-9 * max(flux, energy, 1e-300):
        raise NumericsError(f"flux {flux!r} and energy {energy!r} disagree")
    if flux <= 0.0:
        raise NumericsError("nonpositive effective conductance; network degenerate")
    log_value = shift + math.log(flux)
    return log_value


def effective_conductance(env, lam, rho, a_spec, b_spec, window) -> float:
    """Effective conductance between A and B for the range-rho network.

    A and B are site iterables, rays ("le", n) / ("ge", n), or lists of
    these (unions).  The window (lo, hi) must leave a margin of rho around
    every pinned site and past every ray boundary.
    """
    log_value = _solve_network(env, lam, rho, a_spec, b_spec, window)
    if log_value > _LOG_HUGE:
        raise NumericsError(
            f"conductance exp({log_value:.1f}) overflows; move the window toward the origin"
        )
    return math.exp(log_value)


@dataclass
class ConductanceReport:
    value: float
    log_value: float
    window: tuple
    variants: tuple  # ((lo, hi, value), ...) from re-solves at rescaled windows

    @property
    def sensitivity(self) -> float:
        """Largest relative drift of the value across the window variants."""
        if not self.variants:
            return 0.0
        return max(abs(v - self.value) for (_, _, v) in self.variants) / self.value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "log_value": self.log_value,
            "window": list(self.window),
            "sensitivity": self.sensitivity,
            "variants": [{"lo": lo, "hi": hi, "value": v} for (lo, hi, v) in self.variants],
        }


def _pinned_extent(a_spec, b_spec, lo, hi, rho):
    """Outermost pinned sites, treating a ray as pinning up to its boundary."""

    def bounds(spec):
        if isinstance(spec, tuple) and spec[0] in ("le", "ge"):
            return (None, int(spec[1])) if spec[0] == "le" else (int(spec[1]), None)
        if isinstance(spec, list) and spec and isinstance(spec[0], tuple):
            los, his = zip(*[bounds(s) for s in spec])
            lo_ = None if any(l is None for l in los) else min(los)
            hi_ = None if any(h is None for h in his) else max(his)
            return lo_, hi_
        s = [int(x) for x in spec]
        return min(s), max(s)

    a_lo, a_hi = bounds(a_spec)
    b_lo, b_hi = bounds(b_spec)
    core_lo = None if a_lo is None or b_lo is None else min(a_lo, b_lo)
    core_hi = None if a_hi is None or b_hi is None else max(a_hi, b_hi)
    return core_lo, core_hi


def conductance_report(env, lam, rho, a_spec, b_spec, window) -> ConductanceReport:
    """Conductance plus re-solves with the free window margins scaled 25%.

    Sides bounded by a ray are left alone: beyond rho sites they contribute
    nothing, so only insulated (free) ends carry truncation error.
    """
    lo, hi = int(window[0]), int(window[1])
    log_value = _solve_network(env, lam, rho, a_spec, b_spec, window)
    value = math.exp(log_value) if log_value <= _LOG_HUGE else math.inf
    core_lo, core_hi = _pinned_extent(a_spec, b_spec, lo, hi, rho)

    variants = []
    for factor in (0.75, 1.25):
        v_lo, v_hi = lo, hi
        if core_lo is not None:  # left end is free
            v_lo = core_lo - max(rho, round(factor * (core_lo - lo)))
        if core_hi is not None:  # right end is free
            v_hi = core_hi + max(rho, round(factor * (hi - core_hi)))
        if (v_lo, v_hi) == (lo, hi):
            continue
        variants.append(
            (v_lo, v_hi, effective_conductance(env, lam, rho, a_spec, b_spec, (v_lo, v_hi)))
        )
    return ConductanceReport(
        value=value, log_value=log_value, window=(lo, hi), variants=tuple(variants)
    )


def nn_series(env, lam, k, rho) -> float:
    """Sum of inverse nearest-neighbour conductances from k to rho - 1.

    This is the series-resistance expression the composite conductance ratio
    C1(k, left ray) / (C1(0, right ray) C1(k, both rays)) collapses to for
    range-1 networks.
    """
    k, rho = int(k), int(rho)
    if not 0 < k < rho:
        raise ConfigError("need 0 < k < rho")
    return sum(1.0 / conductance(env, lam, j, j + 1) for j in range(k, rho))


# ------------------------------------------------------------ reduced chain


@dataclass
class FiniteChain:
    """A finite reversible chain given by symmetric edge conductances.

    Transition probabilities are cond[i, j] / pi[i] with pi the row sums,
    which makes pi reversible by construction.
    """

    cond: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cond, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ConfigError("conductance table must be square")
        if np.any(c < 0) or np.any(np.diag(c) != 0.0):
            raise ConfigError("conductances must be nonnegative with zero diagonal")
        if not np.array_equal(c, c.T):
            raise ConfigError("conductance table must be symmetric")
        if np.any(c.sum(axis=1) <= 0):
            raise ConfigError("every state needs at least one edge")
        self.cond = c

    @property
    def n_states(self) -> int:
        return self.cond.shape[0]

    @property
    def pi(self) -> np.ndarray:
        return self.cond.sum(axis=1)

    @property
    def P(self) -> np.ndarray:
        return self.cond / self.pi[:, None]

    def effective_conductance(self, set_e, set_f) -> float:
        """Dirichlet conductance between two pinned state sets."""
        e = np.asarray(sorted(set(map(int, set_e))), dtype=int)
        f_set = np.asarray(sorted(set(map(int, set_f))), dtype=int)
        if np.intersect1d(e, f_set).size:
            raise ConfigError("sets must be disjoint")
        n = self.n_states
        pot = np.zeros(n)
        pot[f_set] = 1.0
        free = np.setdiff1d(np.arange(n), np.concatenate([e, f_set]))
        if free.size:
            L = np.diag(self.pi) - self.cond
            K = L[np.ix_(free, free)]
            rhs = self.cond[np.ix_(free, f_set)].sum(axis=1)
            sol = _dense_solve(K, rhs)
            pot[free] = sol
        flux = float(self.cond[f_set].sum(axis=0) @ (1.0 - pot))
        return flux

    def to_csv(self, path):
        """Edge list i,j,c over the upper triangle of nonzero conductances."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "c"])
            n = self.n_states
            for i in range(n):
                for j in range(i + 1, n):
                    if self.cond[i, j] > 0.0:
                        writer.writerow([i, j, repr(float(self.cond[i, j]))])


def reduce_chain(env, lam, rho) -> FiniteChain:
    """Collapse the range-rho walk onto states {0, ..., rho}.

    Interior edges keep their conductances; everything reaching at or past
    the boundaries is lumped into states 0 and rho.  State 0 and state rho
    are never joined directly.
    """
    rho = int(rho)
    if rho < 2:
        raise ConfigError("reduction needs rho >= 2")
    cond = np.zeros((rho + 1, rho + 1))
    for i in range(1, rho):
        for j in range(1, rho):
            if i != j and abs(i - j) <= rho:
                cond[i, j] = conductance(env, lam, i, j)
        cond[i, 0] = sum(conductance(env, lam, i, m) for m in range(i - rho, 1))
        cond[0, i] = cond[i, 0]
        cond[i, rho] = sum(conductance(env, lam, i, m) for m in range(rho, i + rho + 1))
        cond[rho, i] = cond[i, rho]
    return FiniteChain(cond=cond)


def hitting_probability(chain: FiniteChain, k, target_a=0, target_b=None) -> float:
    """P_k(hit target_a before target_b) by the harmonic linear solve."""
    n = chain.n_states
    if target_b is None:
        target_b = n - 1
    a, b, k = int(target_a), int(target_b), int(k)
    if a == b:
        raise ConfigError("targets must differ")
    if k == a:
        return 1.0
    if k == b:
        return 0.0
    u = np.zeros(n)
    u[a] = 1.0
    free = np.setdiff1d(np.arange(n), [a, b])
    P = chain.P
    K = np.eye(free.size) - P[np.ix_(free, free)]
    rhs = P[free, a]
    sol = _dense_solve(K, rhs)
    if not np.all(np.isfinite(sol)):
        raise NumericsError("disconnected chain: hitting system singular")
    u[free] = sol
    return float(u[k])


def expected_hitting_time(chain: FiniteChain, start, target_set) -> float:
    """Mean steps from start to the target set, validated two ways.

    Beyond the direct linear solve, the reversible identity
    E_a[T_B] = (1 / C_eff(a, B)) sum_k pi(k) P_k(tau_a < tau_B) is evaluated
    from independent solves; disagreement past 1e-9 relative raises.
    """
    start = int(start)
    targets = sorted(set(map(int, target_set)))
    if start in targets:
        return 0.0
    n = chain.n_states
    free = np.setdiff1d(np.arange(n), targets)
    P = chain.P
    K = np.eye(free.size) - P[np.ix_(free, free)]
    sol = _dense_solve(K, np.ones(free.size))
    hit = np.zeros(n)
    hit[free] = sol
    value = float(hit[start])

    # independent route: conductance times occupation of the start
    c_eff = chain.effective_conductance([start], targets)
    total = 0.0
    for k in range(n):
        if k == start:
            p_k = 1.0
        elif k in targets:
            p_k = 0.0
        else:
            p_k = hitting_probability_general(chain, k, [start], targets)
        total += chain.pi[k] * p_k
    other = total / c_eff
    if abs(other - value) > 1e-9 * max(abs(value), abs(other)):
        raise NumericsError(
            f"hitting-time identity failed: solve {value!r} vs conductance route {other!r}"
        )
    return value


def hitting_probability_general(chain: FiniteChain, k, set_a, set_b) -> float:
    """P_k(hit set_a before set_b) for arbitrary disjoint state sets."""
    a = sorted(set(map(int, set_a)))
    b = sorted(set(map(int, set_b)))
    if set(a) & set(b):
        raise ConfigError("sets must be disjoint")
    k = int(k)
    if k in a:
        return 1.0
    if k in b:
        return 0.0
    n = chain.n_states
    u = np.zeros(n)
    u[a] = 1.0
    free = np.setdiff1d(np.arange(n), a + b)
    P = chain.P
    K = np.eye(free.size) - P[np.ix_(free, free)]
    rhs = P[np.ix_(free, a)].sum(axis=1)
    sol = _dense_solve(K, rhs)
    u[free] = sol
    return float(u[k])


# ------------------------------------------------------------ lemma checks


@dataclass
class DromedarioReport:
    """Per-start comparison of the exact-point hitting probability with the
    ray-conductance ratio it is supposed to dominate (up to a constant)."""

    lam: float
    rho: int
    n_samples: int
    rows: tuple  # (k, lhs, two_sided_exact, correction_hat, rhs, ratio)

    @property
    def min_ratio(self) -> float:
        return min(r[-1] for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "rho": self.rho,
            "n_samples": self.n_samples,
            "min_ratio": self.min_ratio,
            "rows": [
                {
                    "k": k,
                    "lhs": lhs,
                    "two_sided_exact": ts,
                    "correction_hat": corr,
                    "rhs": rhs,
                    "ratio": ratio,
                }
                for (k, lhs, ts, corr, rhs, ratio) in self.rows
            ],
        }


def check_dromedario(env, lam, rho, n_samples=2000, seed=0, budget=1_000_000) -> DromedarioReport:
    """Estimate P_k(hit site 0 before [rho, inf)) against the conductance ratio.

    The two-sided part P_k(hit (-inf,0] before [rho,inf)) is exact via the
    reduced chain; the remaining correction, the chance of touching site 0
    itself before the right ray once the left ray has been entered, is
    estimated by continuing the walk from its actual entry site.  Self loops
    are skipped throughout (they cannot change any hitting order).  The bias
    must be positive: leftward excursions of the unbiased walk have infinite
    expected length and would stall the sampler.
    """
    rho = int(rho)
    if rho < 2:
        raise ConfigError("need rho >= 2")
    if not 0.0 < lam:
        raise ConfigError("the correction sampler needs lam > 0")
    reduced = reduce_chain(env, lam, rho)
    cache = LawCache(env, lam, rho=rho)
    window = (-2 * rho, 2 * rho)
    rows = []
    for k in range(1, rho):
        two_sided = hitting_probability(reduced, k, 0, rho)
        entered, reached = 0, 0
        for s in range(n_samples):
            gen = spawn_generator(seed, "dromedario", k, s)
            i, moves = k, 0
            while 0 < i < rho:
                moves += 1
                if moves > budget:
                    raise NumericsError(f"correction sampler stalled at k={k}")
                law = cache.at(i)
                i += int(law.offsets[np.searchsorted(law.cond_cdf, gen.random(), side="right")])
            if i >= rho:
                continue
            entered += 1
            while i != 0 and i < rho:
                moves += 1
                if moves > budget:
                    raise NumericsError(f"correction sampler stalled at k={k}")
                law = cache.at(i)
                i += int(law.offsets[np.searchsorted(law.cond_cdf, gen.random(), side="right")])
            if i == 0:
                reached += 1
        if entered == 0:
            raise NumericsError(
                f"no replica entered the left ray from k={k}; raise n_samples"
            )
        correction = reached / entered
        lhs = two_sided * correction
        num = effective_conductance(env, lam, rho, ("le", 0), [k], window)
        den = effective_conductance(
            env, lam, rho, [("le", 0), ("ge", rho)], [k], window
        )
        rhs = num / den
        rows.append((k, lhs, two_sided, correction, rhs, lhs / rhs))
    return DromedarioReport(lam=float(lam), rho=rho, n_samples=n_samples, rows=tuple(rows))
