"""Random marked-point environments on the line.

An environment is a double-sided sequence of (gap, energy) pairs.  Point k
sits at position x_k with x_0 = 0 and x_{k+1} = x_k + Z_k, and carries an
energy mark E_k.  Gaps obey a hard floor Z_k >= d > 0, so |x_k| >= d|k|.

Three concrete flavors share one accessor protocol (gap / energy / position /
arrays / ensure_range):

* ``Environment``       -- a finite window [-W, W], materialized up front.
* ``PeriodicEnvironment`` -- period-N data unrolled arithmetically to all of Z.
* ``LazyEnvironment``   -- i.i.d. draws materialized on demand, with draws
                           keyed to the coordinate so the window can grow
                           without disturbing what was already sampled.

The energy interaction ``u`` enters jump rates through exp(u(E_i, E_k)); it
must be symmetric and bounded, and the bound is carried explicitly because
truncation certificates depend on it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, WindowExceeded
from .rng import spawn_generator, zigzag

__all__ = [
    "mott_u",
    "USpec",
    "GapLaw",
    "EnergyLaw",
    "GeneratorSpec",
    "Environment",
    "PeriodicEnvironment",
    "LazyEnvironment",
    "sample_environment",
    "make_periodic",
    "shift",
    "reflect",
    "check_assumptions",
    "AssumptionReport",
    "export_csv",
]

# Coordinate draws happen in blocks of this size; the block index, not the
# access order, keys the stream, so materialization order never matters.
_BLOCK = 64


def mott_u(a, b, beta: float = 1.0):
    """Energy pair interaction -(beta/2) (|a| + |b| + |a - b|).

    Symmetric in (a, b), nonpositive, and bounded by 2*beta*A when both
    energies lie in [-A, A].  Vectorizes over numpy arrays.
    """
    return -0.5 * beta * (np.abs(a) + np.abs(b) + np.abs(a - b))


@dataclass(frozen=True)
class USpec:
    """Declared energy interaction: identifier, parameters, and a sup bound."""

    kind: str = "zero"  # "zero" | "mott"
    beta: float = 0.0
    bound: float = 0.0  # sup |u| over the declared energy range

    def __post_init__(self):
        if self.kind not in ("zero", "mott"):
            raise ConfigError(f"unknown u kind {self.kind!r}")
        if self.bound < 0:
            raise ConfigError("u bound must be nonnegative")

    @classmethod
    def zero(cls) -> "USpec":
        return cls("zero", 0.0, 0.0)

    @classmethod
    def mott(cls, beta: float, energy_bound: float) -> "USpec":
        """Mott form with the tight sup bound 2*beta*A for energies in [-A, A]."""
        if beta < 0:
            raise ConfigError("beta must be nonnegative")
        return cls("mott", float(beta), 2.0 * beta * float(energy_bound))

    def __call__(self, a, b):
        if self.kind == "zero" or self.beta == 0.0:
            return np.zeros_like(np.asarray(a, dtype=float) + np.asarray(b, dtype=float))
        return mott_u(a, b, self.beta)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "beta": self.beta, "bound": self.bound}

    @classmethod
    def from_dict(cls, d: dict) -> "USpec":
        return cls(d["kind"], float(d.get("beta", 0.0)), float(d.get("bound", 0.0)))


@dataclass(frozen=True)
class GapLaw:
    """Law of a single gap Z, with hard floor Z >= d > 0.

    kinds:
      constant    -- Z = value
      exponential -- Z = d + Exp(rate); exponential moments finite for p < rate
      heavy_tail  -- Z = d + min(Lomax(alpha), cap); bounded, all moments finite
    """

    kind: str
    d: float
    value: float = 0.0
    rate: float = 0.0
    alpha: float = 0.0
    cap: float = 0.0

    def __post_init__(self):
        if self.d <= 0:
            raise ConfigError("gap floor d must be positive")
        if self.kind == "constant":
            if self.value < self.d:
                raise ConfigError(
                    f"constant gap {self.value} below floor d={self.d}"
                )
        elif self.kind == "exponential":
            if self.rate <= 0:
                raise ConfigError("exponential gap law needs rate > 0")
        elif self.kind == "heavy_tail":
            if self.alpha <= 0 or self.cap <= 0:
                raise ConfigError("heavy_tail gap law needs alpha > 0 and cap > 0")
        else:
            raise ConfigError(f"unknown gap law {self.kind!r}")

    @classmethod
    def constant(cls, value: float, d: float | None = None) -> "GapLaw":
        return cls("constant", float(value if d is None else d), value=float(value))

    @classmethod
    def exponential(cls, d: float, rate: float) -> "GapLaw":
        return cls("exponential", float(d), rate=float(rate))

    @classmethod
    def heavy_tail(cls, d: float, alpha: float, cap: float) -> "GapLaw":
        return cls("heavy_tail", float(d), alpha=float(alpha), cap=float(cap))

    @property
    def p_max(self) -> float:
        """sup of p with E[exp(p Z)] finite (exclusive)."""
        return self.rate if self.kind == "exponential" else math.inf

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(size, self.value)
        if self.kind == "exponential":
            return self.d + gen.exponential(1.0 / self.rate, size)
        return self.d + np.minimum(gen.pareto(self.alpha, size), self.cap)

    def mean(self) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "exponential":
            return self.d + 1.0 / self.rate
        # E[min(Lomax(alpha), cap)] = int_0^cap (1+x)^(-alpha) dx
        a, c = self.alpha, self.cap
        tail_int = math.log1p(c) if a == 1.0 else ((1.0 + c) ** (1.0 - a) - 1.0) / (1.0 - a)
        return self.d + tail_int

    def exp_moment(self, p: float) -> float:
        """E[exp(p Z)], closed form where available, +inf past p_max."""
        if p == 0.0:
            return 1.0
        if self.kind == "constant":
            return math.exp(p * self.value)
        if self.kind == "exponential":
            if p >= self.rate:
                return math.inf
            return math.exp(p * self.d) * self.rate / (self.rate - p)
        from scipy.integrate import quad

        a, c = self.alpha, self.cap
        body, _ = quad(lambda x: math.exp(p * x) * a * (1.0 + x) ** (-a - 1.0), 0.0, c)
        atom = math.exp(p * c) * (1.0 + c) ** (-a)
        return math.exp(p * self.d) * (body + atom)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "d": self.d}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "exponential":
            d["rate"] = self.rate
        else:
            d["alpha"], d["cap"] = self.alpha, self.cap
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GapLaw":
        kind = d["kind"]
        if kind == "constant":
            return cls.constant(d["value"], d.get("d"))
        if kind == "exponential":
            return cls.exponential(d["d"], d["rate"])
        return cls.heavy_tail(d["d"], d["alpha"], d["cap"])


@dataclass(frozen=True)
class EnergyLaw:
    """Law of a single energy mark: zero, or uniform on [-amplitude, amplitude]."""

    kind: str = "zero"
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "uniform"):
            raise ConfigError(f"unknown energy law {self.kind!r}")
        if self.kind == "uniform" and self.amplitude <= 0:
            raise ConfigError("uniform energy law needs amplitude > 0")

    @property
    def bound(self) -> float:
        return self.amplitude if self.kind == "uniform" else 0.0

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(size)
        return gen.uniform(-self.amplitude, self.amplitude, size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyLaw":
        return cls(d["kind"], float(d.get("amplitude", 0.0)))


@dataclass(frozen=True)
class GeneratorSpec:
    """Everything needed to draw an i.i.d. environment deterministically."""

    gap_law: GapLaw
    energy_law: EnergyLaw = EnergyLaw()
    u: USpec | None = None
    window: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("window radius must be >= 1")
        if self.u is None:
            object.__setattr__(self, "u", USpec.zero())

    def with_seed(self, seed: int) -> "GeneratorSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "gap_law": self.gap_law.to_dict(),
            "energy_law": self.energy_law.to_dict(),
            "u": self.u.to_dict(),
            "window": self.window,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        return cls(
            gap_law=GapLaw.from_dict(d["gap_law"]),
            energy_law=EnergyLaw.from_dict(d.get("energy_law", {"kind": "zero"})),
            u=USpec.from_dict(d["u"]) if "u" in d else None,
            window=int(d.get("window", 64)),
            seed=int(d.get("seed", 0)),
        )


def _draw_coords(law, seed: int, purpose: str, lo: int, hi: int) -> np.ndarray:
    """Values for coordinates lo..hi inclusive, keyed per 64-coordinate block."""
    b_lo, b_hi = lo // _BLOCK, hi // _BLOCK
    chunks = []
    for b in range(b_lo, b_hi + 1):
        gen = spawn_generator(seed, purpose, zigzag(b))
        chunks.append(law.sample(gen, _BLOCK))
    block = np.concatenate(chunks)
    start = lo - b_lo * _BLOCK
    return block[start : start + (hi - lo + 1)]


def _positions_from_gaps(gaps: np.ndarray, lo: int) -> np.ndarray:
    """Positions for coordinates lo..lo+len(gaps) inclusive, anchored x_0 = 0.

    ``gaps[j]`` is the gap between points lo+j and lo+j+1; lo <= 0 is required
    so the anchor lies inside the range.
    """
    j0 = -lo  # index of coordinate 0
    pos = np.zeros(len(gaps) + 1)
    pos[j0 + 1 :] = np.cumsum(gaps[j0:])
    if j0 > 0:
        pos[:j0] = -np.cumsum(gaps[:j0][::-1])[::-1]
    return pos


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Environment:
    """Finite window [-W, W] of gaps and energies.  Immutable."""

    gaps: np.ndarray  # Z_k for k in [-W, W-1], length 2W
    energies: np.ndarray  # E_k for k in [-W, W], length 2W+1
    d: float
    u: USpec
    positions: np.ndarray = field(default=None, repr=False)  # filled in __post_init__

    def __post_init__(self):
        gaps = _freeze(self.gaps)
        energies = _freeze(self.energies)
        if len(gaps) == 0 or len(energies) == 0:
            raise ConfigError("empty environment")
        if len(energies) != len(gaps) + 1 or len(gaps) % 2 != 0:
            raise ConfigError(
                f"window shape mismatch: {len(gaps)} gaps, {len(energies)} energies"
            )
        if self.d <= 0:
            raise ConfigError("gap floor d must be positive")
        if np.any(gaps < self.d * (1 - 1e-12)):
            raise ConfigError("gap below floor d")
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "positions", _freeze(_positions_from_gaps(gaps, -self.W)))
        self._check_u()

    def _check_u(self):
        # Spot-check symmetry and the declared bound on the stored marks.
        e = self.energies[:: max(1, len(self.energies) // 8)]
        a, b = np.meshgrid(e, e)
        vals = self.u(a, b)
        if not np.allclose(vals, self.u(b, a), atol=1e-12):
            raise ConfigError("u is not symmetric on sampled energy pairs")
        if np.any(np.abs(vals) > self.u.bound + 1e-12):
            raise ConfigError("u exceeds its declared bound on stored energies")

    @property
    def W(self) -> int:
        return len(self.gaps) // 2

    def span(self) -> tuple[int, int]:
        return (-self.W, self.W)

    def ensure_range(self, lo: int, hi: int) -> None:
        if lo < -self.W or hi > self.W:
            raise WindowExceeded(lo, hi, -self.W, self.W)

    def gap(self, k: int) -> float:
        self.ensure_range(k, k + 1)
        return float(self.gaps[k + self.W])

    def energy(self, k: int) -> float:
        self.ensure_range(k, k)
        return float(self.energies[k + self.W])

    def position(self, k: int) -> float:
        self.ensure_range(k, k)
        return float(self.positions[k + self.W])

    def arrays(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """(positions, energies) for coordinates lo..hi inclusive."""
        self.ensure_range(lo, hi)
        return (
            self.positions[lo + self.W : hi + self.W + 1],
            self.energies[lo + self.W : hi + self.W + 1],
        )


@dataclass(frozen=True)
class PeriodicEnvironment:
    """Period-N marked points unrolled to all of Z.

    gaps[r] = Z_r and energies[r] = E_r for r in 0..N-1; Z_{k+N} = Z_k and
    E_{k+N} = E_k.  Positions follow x_{k+N} = x_k + L with L the period span.
    """

    gaps: np.ndarray
    energies: np.ndarray
    d: float
    u: USpec
    prefix: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        gaps = _freeze(self.gaps)
        energies = _freeze(self.energies)
        if len(gaps) == 0 or len(gaps) != len(energies):
            raise ConfigError("periodic environment needs matching nonempty arrays")
        if self.d <= 0:
            raise ConfigError("gap floor d must be positive")
        if np.any(gaps < self.d * (1 - 1e-12)):
            raise ConfigError("gap below floor d")
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "energies", energies)
        prefix = np.concatenate(([0.0], np.cumsum(gaps)[:-1]))
        object.__setattr__(self, "prefix", _freeze(prefix))

    @property
    def N(self) -> int:
        return len(self.gaps)

    @property
    def period_span(self) -> float:
        return float(self.prefix[-1] + self.gaps[-1])

    def span(self) -> None:
        return None

    def ensure_range(self, lo: int, hi: int) -> None:
        pass

    def gap(self, k: int) -> float:
        return float(self.gaps[k % self.N])

    def energy(self, k: int) -> float:
        return float(self.energies[k % self.N])

    def position(self, k: int) -> float:
        q, r = divmod(int(k), self.N)
        return q * self.period_span + float(self.prefix[r])

    def arrays(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        ks = np.arange(lo, hi + 1)
        q, r = np.divmod(ks, self.N)
        return q * self.period_span + self.prefix[r], self.energies[r]


class LazyEnvironment:
    """I.i.d. environment materialized on demand.

    Draws are keyed by coordinate block, so extending the window in either
    direction reproduces exactly the values any smaller window saw.
    """

    def __init__(self, spec: GeneratorSpec):
        self.spec = spec
        self.d = spec.gap_law.d
        self.u = spec.u
        w = max(spec.window, _BLOCK)
        self._lo = -w
        self._hi = w
        self._rebuild()

    def _rebuild(self):
        lo, hi = self._lo, self._hi
        self._gaps = _draw_coords(self.spec.gap_law, self.spec.seed, "gaps", lo, hi - 1)
        self._energies = _draw_coords(
            self.spec.energy_law, self.spec.seed, "energies", lo, hi
        )
        self._pos = _positions_from_gaps(self._gaps, lo)

    def span(self) -> None:
        return None

    def ensure_range(self, lo: int, hi: int) -> None:
        if lo >= self._lo and hi <= self._hi:
            return
        # Grow in whole blocks, at least doubling, to amortize rebuilds.
        grow = max(self._hi - self._lo, 2 * _BLOCK)
        while lo < self._lo:
            self._lo -= grow
        while hi > self._hi:
            self._hi += grow
        self._rebuild()

    def gap(self, k: int) -> float:
        self.ensure_range(k, k + 1)
        return float(self._gaps[k - self._lo])

    def energy(self, k: int) -> float:
        self.ensure_range(k, k)
        return float(self._energies[k - self._lo])

    def position(self, k: int) -> float:
        self.ensure_range(k, k)
        return float(self._pos[k - self._lo])

    def arrays(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        self.ensure_range(lo, hi)
        i, j = lo - self._lo, hi - self._lo + 1
        return self._pos[i:j], self._energies[i:j]


def sample_environment(spec: GeneratorSpec) -> Environment:
    """Materialize the window [-W, W] of the i.i.d. environment ``spec``.

    Pure in (spec, seed): calling twice gives identical arrays, and a larger
    window agrees with a smaller one on their common coordinates.
    """
    w = spec.window
    gaps = _draw_coords(spec.gap_law, spec.seed, "gaps", -w, w - 1)
    energies = _draw_coords(spec.energy_law, spec.seed, "energies", -w, w)
    return Environment(gaps=gaps, energies=energies, d=spec.gap_law.d, u=spec.u)


def make_periodic(gaps, energies=None, d: float | None = None, u: USpec | None = None) -> PeriodicEnvironment:
    """Wrap explicit arrays as a periodic environment.

    Energies default to zero marks, the floor to the smallest gap, and u to
    the zero interaction.
    """
    gaps = np.asarray(gaps, dtype=float)
    if gaps.size == 0:
        raise ConfigError("empty gap array")
    if d is None:
        d = float(np.min(gaps))
    if energies is None:
        energies = np.zeros_like(gaps)
    return PeriodicEnvironment(
        gaps=gaps,
        energies=np.asarray(energies, dtype=float),
        d=d,
        u=u if u is not None else USpec.zero(),
    )


def shift(env, ell: int):
    """View the environment from point ell (new origin at old x_ell).

    Windowed environments shrink by |ell| on each side and reject shifts that
    would leave less than radius 1.
    """
    ell = int(ell)
    if isinstance(env, PeriodicEnvironment):
        return PeriodicEnvironment(
            gaps=np.roll(env.gaps, -ell),
            energies=np.roll(env.energies, -ell),
            d=env.d,
            u=env.u,
        )
    if isinstance(env, Environment):
        w2 = env.W - abs(ell)
        if w2 < 1:
            raise ConfigError(
                f"shift by {ell} exceeds window radius {env.W}"
            )
        a = ell + env.W - w2
        return Environment(
            gaps=env.gaps[a : a + 2 * w2],
            energies=env.energies[a : a + 2 * w2 + 1],
            d=env.d,
            u=env.u,
        )
    raise ConfigError(f"cannot shift {type(env).__name__}")


def reflect(env):
    """Mirror the environment through the origin: x -> -x.

    New gaps are Z'_k = Z_{-k-1} and new energies E'_k = E_{-k}; running the
    biased walk on the reflection is equivalent to flipping the sign of the
    bias and of all displacements on the original.
    """
    if isinstance(env, PeriodicEnvironment):
        return PeriodicEnvironment(
            gaps=env.gaps[::-1].copy(),
            energies=np.roll(env.energies[::-1], 1),
            d=env.d,
            u=env.u,
        )
    if isinstance(env, Environment):
        return Environment(
            gaps=env.gaps[::-1].copy(),
            energies=env.energies[::-1].copy(),
            d=env.d,
            u=env.u,
        )
    raise ConfigError(f"cannot reflect {type(env).__name__}")


@dataclass(frozen=True)
class AssumptionReport:
    """Diagnostics for the standing assumptions on a generator spec."""

    d: float
    n_samples: int
    min_gap: float
    mean_gap: float
    mean_gap_exact: float
    exp_moments: tuple  # rows (p, empirical, closed_form, diverges)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n_samples": self.n_samples,
            "min_gap": self.min_gap,
            "mean_gap": self.mean_gap,
            "mean_gap_exact": self.mean_gap_exact,
            "exp_moments": [
                {"p": p, "empirical": emp, "closed_form": cf, "diverges": dv}
                for (p, emp, cf, dv) in self.exp_moments
            ],
        }


def check_assumptions(
    spec: GeneratorSpec, n_samples: int = 10_000, p_values=(1.0, 2.0)
) -> AssumptionReport:
    """Sample-based check of the gap floor and exponential gap moments.

    Flags each requested p with E[exp(p Z)] = inf instead of reporting a
    meaningless empirical average for it.
    """
    gen = spawn_generator(spec.seed, "assumptions")
    z = spec.gap_law.sample(gen, n_samples)
    rows = []
    for p in p_values:
        cf = spec.gap_law.exp_moment(p)
        diverges = not math.isfinite(cf)
        emp = math.inf if diverges else float(np.mean(np.exp(p * z)))
        rows.append((float(p), emp, cf, diverges))
    return AssumptionReport(
        d=spec.gap_law.d,
        n_samples=n_samples,
        min_gap=float(np.min(z)),
        mean_gap=float(np.mean(z)),
        mean_gap_exact=spec.gap_law.mean(),
        exp_moments=tuple(rows),
    )


def export_csv(env, path) -> None:
    """Write the window (or one period) as rows k, Z_k, E_k, x_k."""
    if isinstance(env, PeriodicEnvironment):
        ks = range(env.N)
    elif isinstance(env, Environment):
        ks = range(-env.W, env.W + 1)
    else:
        raise ConfigError(f"cannot export {type(env).__name__}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "Z_k", "E_k", "x_k"])
        for k in ks:
            try:
                z = repr(env.gap(k))
            except WindowExceeded:
                z = ""
            writer.writerow([k, z, repr(env.energy(k)), repr(env.position(k))])
