"""Path sampling for the hop walk, in three clocks.

run_discrete draws the jump chain, one uniform per step.  run_continuous
produces the same embedded chain bit for bit (the jump uniforms come from a
dedicated substream shared by both engines) and adds exponential holds at the
site's total jump rate, which is bounded and position free, so no gauge factor
ever enters the sampler.  run_truncated restricts moves to a finite range rho
while keeping the untruncated normalization; the removed mass becomes a self
loop.

Hitting-time samplers compress runs of self loops into geometric holds.  That
is exact in law (the loop count at a site is geometric and independent of the
eventual move) and turns deep-truncation runs from O(time) into O(moves).

Every engine accumulates positions incrementally from the per-jump
displacement tables and checks the total against the environment geometry at
the end; a mismatch means corrupted bookkeeping and raises instead of
returning a quietly wrong path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .env import PeriodicEnvironment
from .errors import BudgetError, ConfigError, NumericsError
from .kernel import jump_law
from .rng import spawn_generator

__all__ = [
    "Trajectory",
    "HittingSample",
    "LawCache",
    "run_discrete",
    "run_continuous",
    "run_truncated",
    "sample_T",
    "sample_two_sided",
    "read_trajectory_log",
]

# one record per visited state: (step, site index, clock reading)
_RECORD = struct.Struct("<Qqd")


@dataclass
class SiteLaw:
    """Sampling tables for one site: full-step cdf and conditional-move cdf.

    ``stay`` is the self-loop mass of the truncated walk (0 untruncated).
    The full cdf covers the move offsets and, when stay > 0, one trailing
    entry for the loop; both cdfs end exactly at 1.
    """

    offsets: np.ndarray
    disp: np.ndarray
    cdf: np.ndarray
    cond_cdf: np.ndarray
    stay: float
    pi: float


class LawCache:
    """Per-site jump laws, built on demand.

    Periodic environments share laws across the orbit of a site (the geometry
    seen from i depends only on i mod N), so a walk of any length touches at
    most N distinct laws.
    """

    def __init__(self, env, lam: float, rho: int | None = None, tail_tol: float = 1e-12):
        if rho is not None and rho < 1:
            raise ConfigError("truncation range rho must be >= 1")
        self.env = env
        self.lam = float(lam)
        self.rho = rho
        self.tail_tol = tail_tol
        self._period = env.N if isinstance(env, PeriodicEnvironment) else None
        self._laws: dict[int, SiteLaw] = {}

    def at(self, i: int) -> SiteLaw:
        key = i % self._period if self._period is not None else i
        law = self._laws.get(key)
        if law is None:
            law = self._build(key)
            self._laws[key] = law
        return law

    def _build(self, i: int) -> SiteLaw:
        base = jump_law(self.env, self.lam, i=i, tail_tol=self.tail_tol)
        if self.rho is None:
            probs, offsets, disp, stay = base.probs, base.offsets, base.disp, 0.0
        else:
            keep = np.abs(base.offsets) <= self.rho
            offsets, disp = base.offsets[keep], base.disp[keep]
            probs = base.probs[keep]
            stay = max(0.0, 1.0 - float(probs.sum()))
        if self.rho is None:
            cdf = base.cdf
        else:
            cdf = np.cumsum(np.append(probs, stay))
            cdf /= cdf[-1]
            cdf[-1] = 1.0
        cond = np.cumsum(probs)
        cond /= cond[-1]
        cond[-1] = 1.0
        return SiteLaw(
            offsets=offsets, disp=disp, cdf=cdf, cond_cdf=cond, stay=stay, pi=base.pi
        )


@dataclass
class Trajectory:
    """A sampled path: site indices, unfolded positions, and clock readings.

    ``times`` is None for the discrete clock.  Positions are accumulated
    jump by jump, so positions[t] - positions[0] is exactly the sum of the
    sampled displacements.
    """

    lam: float
    rho: int | None
    indices: np.ndarray
    positions: np.ndarray
    times: np.ndarray | None

    @property
    def n_steps(self) -> int:
        return len(self.indices) - 1

    @property
    def displacement(self) -> float:
        return float(self.positions[-1] - self.positions[0])

    def occupation(self, n_states: int) -> np.ndarray:
        """Visit counts by site index modulo n_states."""
        return np.bincount(self.indices % n_states, minlength=n_states)

    def write_log(self, path):
        """Binary log, one little-endian (u64 step, i64 index, f64 time) record per row."""
        times = self.times if self.times is not None else np.arange(len(self.indices), dtype=float)
        with open(path, "wb") as fh:
            for step, (i, t) in enumerate(zip(self.indices, times)):
                fh.write(_RECORD.pack(step, int(i), float(t)))


def read_trajectory_log(path) -> np.ndarray:
    """Structured array (step, index, time) from a binary trajectory log."""
    raw = np.fromfile(path, dtype=np.dtype([("step", "<u8"), ("index", "<i8"), ("time", "<f8")]))
    return raw


def _check_geometry(env, i0, i1, accumulated, travelled):
    # slack: relative on the net displacement plus accumulation rounding,
    # which grows with the total distance travelled, not the net
    true_disp = env.position(i1) - env.position(i0)
    if abs(accumulated - true_disp) > 1e-9 * (1.0 + abs(true_disp)) + 5e-12 * travelled:
        raise NumericsError(
            f"displacement bookkeeping drifted: {accumulated!r} vs {true_disp!r}"
        )


def _run(env, lam, n_steps, seed, rho, continuous, start, log_path, tail_tol):
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    cache = LawCache(env, lam, rho=rho, tail_tol=tail_tol)
    jumps = spawn_generator(seed, "jumps")
    holds = spawn_generator(seed, "holds") if continuous else None

    indices = np.empty(n_steps + 1, dtype=np.int64)
    positions = np.empty(n_steps + 1, dtype=float)
    times = np.empty(n_steps + 1, dtype=float) if continuous else None
    i = int(start)
    x = float(env.position(i))
    t = 0.0
    indices[0], positions[0] = i, x
    if continuous:
        times[0] = 0.0
    travelled = 0.0
    for step in range(n_steps):
        law = cache.at(i)
        if continuous:
            t += holds.exponential(1.0 / law.pi)
            times[step + 1] = t
        u = jumps.random()
        j = int(np.searchsorted(law.cdf, u, side="right"))
        if j < len(law.offsets):  # the trailing cdf slot, if any, is the self loop
            i += int(law.offsets[j])
            d = float(law.disp[j])
            x += d
            travelled += abs(d)
        indices[step + 1], positions[step + 1] = i, x
    _check_geometry(env, int(start), i, x - positions[0], travelled)
    traj = Trajectory(lam=float(lam), rho=rho, indices=indices, positions=positions, times=times)
    if log_path is not None:
        traj.write_log(log_path)
    return traj


def run_discrete(env, lam, n_steps, seed, start=0, log_path=None, tail_tol=1e-12):
    """Sample the jump chain for n_steps steps."""
    return _run(env, lam, n_steps, seed, None, False, start, log_path, tail_tol)


def run_continuous(env, lam, n_steps, seed, start=0, log_path=None, tail_tol=1e-12):
    """Sample n_steps jumps of the continuous-time walk.

    The embedded chain equals run_discrete with the same seed, bit for bit.
    """
    return _run(env, lam, n_steps, seed, None, True, start, log_path, tail_tol)


def run_truncated(env, lam, rho, n_steps, seed, start=0, log_path=None, tail_tol=1e-12):
    """Sample the range-rho walk; rho=None is exactly the untruncated engine."""
    if rho is None:
        return run_discrete(env, lam, n_steps, seed, start=start, log_path=log_path, tail_tol=tail_tol)
    return _run(env, lam, n_steps, seed, rho, False, start, log_path, tail_tol)


@dataclass
class HittingSample:
    """First-passage statistics to site index >= level."""

    lam: float
    rho: int | None
    level: int
    steps: np.ndarray  # walk steps, self loops included
    overshoot: np.ndarray  # landing index minus level, in index units

    @property
    def mean_steps(self) -> float:
        return float(np.mean(self.steps))

    @property
    def landing_exact_fraction(self) -> float:
        """Empirical P(the walk lands exactly on the level it first clears)."""
        return float(np.mean(self.overshoot == 0))


def sample_T(env, lam, rho, level, n_samples, seed, budget=10_000_000, tail_tol=1e-12):
    """First-passage times of the (possibly truncated) walk to index >= level.

    Self-loop runs are drawn as geometric holds; with rho=None no geometric
    is ever drawn and the step count is the plain jump-chain passage time.
    A path still short of the level after ``budget`` steps raises BudgetError.
    """
    level = int(level)
    if level <= 0:
        raise ConfigError("level must be a positive site index")
    cache = LawCache(env, lam, rho=rho, tail_tol=tail_tol)
    steps = np.empty(n_samples, dtype=np.int64)
    over = np.empty(n_samples, dtype=np.int64)
    for s in range(n_samples):
        gen = spawn_generator(seed, "hitting", s)
        i, t = 0, 0
        while i < level:
            law = cache.at(i)
            if law.stay > 0.0:
                t += int(gen.geometric(1.0 - law.stay))
            else:
                t += 1
            if t > budget:
                raise BudgetError(
                    f"replica {s} still below level {level} after {budget} steps",
                    steps=budget,
                )
            u = gen.random()
            i += int(law.offsets[np.searchsorted(law.cond_cdf, u, side="right")])
        steps[s], over[s] = t, i - level
    return HittingSample(lam=float(lam), rho=rho, level=level, steps=steps, overshoot=over)


def sample_two_sided(env, lam, rho, start, lower, upper, n_samples, seed, budget=10_000_000, tail_tol=1e-12):
    """Indicator samples of {hit index <= lower before index >= upper}.

    Runs the conditional-move walk (self loops dropped entirely; they cannot
    change which side is hit first), so the cost is the number of moves.
    """
    if not lower < start < upper:
        raise ConfigError("need lower < start < upper")
    cache = LawCache(env, lam, rho=rho, tail_tol=tail_tol)
    hit_low = np.empty(n_samples, dtype=bool)
    for s in range(n_samples):
        gen = spawn_generator(seed, "twosided", s)
        i, moves = int(start), 0
        while lower < i < upper:
            moves += 1
            if moves > budget:
                raise BudgetError(
                    f"replica {s} undecided between {lower} and {upper} after {budget} moves",
                    steps=budget,
                )
            law = cache.at(i)
            u = gen.random()
            i += int(law.offsets[np.searchsorted(law.cond_cdf, u, side="right")])
        hit_low[s] = i <= lower
    return hit_low
