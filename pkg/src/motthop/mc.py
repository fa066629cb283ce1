"""Monte Carlo estimators for the environment chain seen from the walker.

Exact chain computations stop at periodic environments; these estimators are
the tool for everything else (i.i.d. gaps, long-run behaviour), and on
periodic environments they double as the cross-validation loop against the
exact values.

Two engines back the estimators.  Periodic environments use a vectorized
ensemble: all replicas advance one step per numpy pass, drawing uniforms from
per-replica Philox streams in fixed 4096-draw chunks, so replica r's path
never depends on how many replicas run beside it or on chunking.  General
environments fall back to the scalar walk; the walk revisits few sites per
unit of range, so per-site law caching keeps that affordable at test scale.

Error bars: with several replicas the spread of replica means is the
standard error (replicas are genuinely independent, and for sampled
environments this includes environment-to-environment variance); a single
long path falls back to batch means with 30 batches.  Nothing here corrects
for burn-in bias beyond an explicit discard prefix; run lengths are chosen
empirically, and the calibration harness keeps the interval machinery
honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .env import GeneratorSpec, LazyEnvironment, PeriodicEnvironment
from .errors import ConfigError
from .kernel import jump_law
from .oracle import ChainMatrices, build_chain, drift_vector, reversible_law, stationary
from .rng import derive_int, spawn_generator
from .walk import run_continuous, run_discrete

__all__ = [
    "EstimateCI",
    "CltReport",
    "EinsteinMcReport",
    "CalibrationReport",
    "observable_vector",
    "observable_names",
    "batch_means",
    "estimate_Q",
    "estimate_velocity",
    "estimate_diffusion",
    "estimate_clt",
    "einstein_mc",
    "ci_calibration",
]

_CHUNK = 4096
_LEVEL = 0.95


# ---------------------------------------------------------------- intervals


@dataclass(frozen=True)
class EstimateCI:
    """Point estimate with a standard error and the bookkeeping behind it.

    ``batches`` is the number of independent quantities the error bar came
    from: the replica count, or the batch count for a single path.
    """

    value: float
    stderr: float
    batches: int
    replicas: int
    seed: int
    level: float = _LEVEL
    label: str = ""
    note: str = ""

    @property
    def half_width(self) -> float:
        if self.batches < 2:
            return math.inf
        return float(stats.t.ppf(0.5 + self.level / 2, self.batches - 1)) * self.stderr

    def ci(self) -> tuple[float, float]:
        hw = self.half_width
        return (self.value - hw, self.value + hw)

    def z(self, truth: float) -> float:
        """Distance from truth in standard errors (inf when stderr is 0)."""
        if self.stderr == 0.0:
            return 0.0 if self.value == truth else math.inf
        return abs(self.value - truth) / self.stderr

    def covers(self, truth: float) -> bool:
        lo, hi = self.ci()
        return lo <= truth <= hi

    def to_row(self) -> dict:
        return {
            "label": self.label,
            "estimate": self.value,
            "stderr": self.stderr,
            "batches": self.batches,
            "replicas": self.replicas,
            "level": self.level,
            "seed": self.seed,
            "note": self.note,
        }


def batch_means(series, n_batches: int = 30):
    """(mean, stderr, batches) for a correlated series via batch means."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ConfigError("batch means needs a 1-d series of length >= 2")
    b = min(n_batches, x.size // 2)
    if b < 2:
        raise ConfigError("series too short to form two batches")
    width = x.size // b
    means = x[: b * width].reshape(b, width).mean(axis=1)
    return float(x.mean()), float(np.std(means, ddof=1) / math.sqrt(b)), b


def _combine_replicas(values, seed, label, note="", batch_series=None):
    """Replica means to an EstimateCI.

    With one replica the error bar comes from ``batch_series``, the already
    batched per-batch means along that single path.
    """
    v = np.asarray(values, dtype=float)
    if v.size >= 2:
        return EstimateCI(
            value=float(v.mean()),
            stderr=float(np.std(v, ddof=1) / math.sqrt(v.size)),
            batches=v.size,
            replicas=v.size,
            seed=seed,
            label=label,
            note=note,
        )
    if batch_series is None or len(batch_series) < 2:
        raise ConfigError("a single replica needs >= 2 path batches for an error bar")
    b = np.asarray(batch_series, dtype=float)
    return EstimateCI(
        value=float(v[0]),
        stderr=float(np.std(b, ddof=1) / math.sqrt(b.size)),
        batches=b.size,
        replicas=1,
        seed=seed,
        label=label,
        note=note,
    )


# ---------------------------------------------------------------- observables


def observable_names() -> tuple:
    return ("one", "pi", "inv_pi", "phi", "gap", "gap_in:<a>,<b>")


def _parse_gap_in(name: str):
    try:
        a, b = (float(part) for part in name.split(":", 1)[1].split(","))
    except ValueError as exc:
        raise ConfigError(f"malformed observable {name!r}; want gap_in:a,b") from exc
    if not a < b:
        raise ConfigError("gap_in needs a < b")
    return a, b


def observable_vector(chain: ChainMatrices, name: str) -> np.ndarray:
    """Statewise values of a registered observable on a periodic chain."""
    penv = chain.penv
    if name == "one":
        return np.ones(chain.N)
    if name == "pi":
        return chain.pi.copy()
    if name == "inv_pi":
        return 1.0 / chain.pi
    if name == "phi":
        return drift_vector(chain)
    if name == "gap":
        return penv.gaps.copy()
    if name.startswith("gap_in:"):
        a, b = _parse_gap_in(name)
        return ((penv.gaps >= a) & (penv.gaps < b)).astype(float)
    raise ConfigError(f"unknown observable {name!r}; known: {observable_names()}")


class _SiteObservables:
    """Observable evaluation for general environments, cached by site."""

    def __init__(self, env, lam, names, tail_tol=1e-12):
        self.env = env
        self.lam = lam
        self.names = tuple(names)
        self.tail_tol = tail_tol
        self._needs_law = any(n in ("pi", "inv_pi", "phi") for n in self.names)
        self._cache: dict[int, tuple] = {}

    def values(self, i: int) -> tuple:
        got = self._cache.get(i)
        if got is None:
            got = self._evaluate(i)
            self._cache[i] = got
        return got

    def _evaluate(self, i: int) -> tuple:
        if self._needs_law:
            law = jump_law(self.env, self.lam, i=i, tail_tol=self.tail_tol)
            pi = law.pi
            phi = float(law.probs @ law.disp)
        out = []
        for name in self.names:
            if name == "one":
                out.append(1.0)
            elif name == "pi":
                out.append(pi)
            elif name == "inv_pi":
                out.append(1.0 / pi)
            elif name == "phi":
                out.append(phi)
            elif name == "gap":
                out.append(float(self.env.gap(i)))
            elif name.startswith("gap_in:"):
                a, b = _parse_gap_in(name)
                out.append(1.0 if a <= float(self.env.gap(i)) < b else 0.0)
            else:
                raise ConfigError(f"unknown observable {name!r}")
        return tuple(out)


# ---------------------------------------------------------------- engines


@dataclass
class _EnsembleResult:
    obs_sums: np.ndarray  # (n_obs, R)
    obs_snapshots: np.ndarray  # (n_obs, R, n_snaps) running sums at batch edges
    disp: np.ndarray  # (R,)
    time: np.ndarray | None  # (R,) continuous clock only
    rec_clock: np.ndarray | None  # (R, M) decimated clock readings
    rec_disp: np.ndarray | None  # (R, M) decimated displacements
    snap_steps: np.ndarray = field(default=None)


def _run_periodic_ensemble(
    penv: PeriodicEnvironment,
    lam: float,
    n_steps: int,
    replicas: int,
    seed: int,
    obs_vectors=(),
    continuous: bool = False,
    record_stride: int | None = None,
    tail_tol: float = 1e-12,
    n_snaps: int = 30,
) -> _EnsembleResult:
    """Advance all replicas together; per-replica streams, chunked draws.

    Starts are drawn from the exact stationary law, so Birkhoff sums need no
    burn-in on periodic environments.
    """
    if n_steps < 1 or replicas < 1:
        raise ConfigError("need n_steps >= 1 and replicas >= 1")
    chain = build_chain(penv, lam, tail_tol)
    n_states, noff = chain.probs.shape
    cdf = np.cumsum(chain.probs, axis=1)
    cdf /= cdf[:, -1:]
    cdf[:, -1] = 1.0
    offsets = chain.offsets
    disp_table = chain.disp
    q = reversible_law(chain) if lam == 0.0 else stationary(chain)
    q_cum = np.cumsum(q)
    q_cum[-1] = 1.0
    inv_pi = 1.0 / chain.pi

    gens = [spawn_generator(seed, "replica", r) for r in range(replicas)]
    u0 = np.array([g.random() for g in gens])
    states = np.searchsorted(q_cum, u0, side="right").astype(np.int64)

    n_obs = len(obs_vectors)
    obs = np.stack([np.asarray(v, dtype=float) for v in obs_vectors]) if n_obs else None
    obs_sums = np.zeros((n_obs, replicas))
    snap_steps = np.unique(
        np.ceil(np.arange(1, n_snaps + 1) * n_steps / n_snaps).astype(int)
    )
    snapshots = np.zeros((n_obs, replicas, len(snap_steps)))
    snap_at = {int(s): k for k, s in enumerate(snap_steps)}

    disp = np.zeros(replicas)
    time = np.zeros(replicas) if continuous else None
    if record_stride is not None:
        n_rec = n_steps // record_stride + 1
        rec_clock = np.zeros((replicas, n_rec))
        rec_disp = np.zeros((replicas, n_rec))
        rec_next = 1
    else:
        rec_clock = rec_disp = None

    u_buf = np.empty((replicas, _CHUNK))
    e_buf = np.empty((replicas, _CHUNK)) if continuous else None
    for step in range(n_steps):
        k = step % _CHUNK
        if k == 0:
            for r, g in enumerate(gens):
                u_buf[r] = g.random(_CHUNK)
            if continuous:
                for r, g in enumerate(gens):
                    e_buf[r] = g.standard_exponential(_CHUNK)
        if n_obs:
            obs_sums += obs[:, states]
        if continuous:
            time += e_buf[:, k] * inv_pi[states]
        row = cdf[states]
        idx = (u_buf[:, k][:, None] > row).sum(axis=1)
        disp += disp_table[states, idx]
        states = (states + offsets[idx]) % n_states
        done = step + 1
        if done in snap_at:
            snapshots[:, :, snap_at[done]] = obs_sums
        if rec_clock is not None and done % record_stride == 0 and rec_next < rec_clock.shape[1]:
            rec_clock[:, rec_next] = time if continuous else done
            rec_disp[:, rec_next] = disp
            rec_next += 1
    return _EnsembleResult(
        obs_sums=obs_sums,
        obs_snapshots=snapshots,
        disp=disp,
        time=time,
        rec_clock=rec_clock,
        rec_disp=rec_disp,
        snap_steps=snap_steps,
    )


def _iid_replica_run(spec: GeneratorSpec, lam, n_steps, seed, r, names, continuous, burn_in, tail_tol):
    env = LazyEnvironment(spec.with_seed(derive_int(seed, "environment", r)))
    runner = run_continuous if continuous else run_discrete
    traj = runner(env, lam, burn_in + n_steps, derive_int(seed, "path", r), tail_tol=tail_tol)
    evaluator = _SiteObservables(env, lam, names, tail_tol) if names else None
    sums = np.zeros(len(names))
    for i in traj.indices[burn_in:-1]:
        if evaluator is not None:
            sums += evaluator.values(int(i))
    disp = float(traj.positions[-1] - traj.positions[burn_in])
    elapsed = None
    if continuous:
        elapsed = float(traj.times[-1] - traj.times[burn_in])
    return sums, disp, elapsed


def _require_spec_kind(env_spec):
    if isinstance(env_spec, PeriodicEnvironment):
        return "periodic"
    if isinstance(env_spec, GeneratorSpec):
        return "iid"
    raise ConfigError(
        "env_spec must be a PeriodicEnvironment or a GeneratorSpec, "
        f"got {type(env_spec).__name__}"
    )


# ---------------------------------------------------------------- estimators


def estimate_Q(env_spec, lam, f_spec, n, replicas, seed=0, tail_tol=1e-12) -> EstimateCI:
    """Birkhoff average of a registered observable along the environment chain.

    The observable is evaluated at the same bias as the walk.  On sampled
    environments each replica walks a fresh environment, so the error bar
    includes environment-to-environment variation.
    """
    kind = _require_spec_kind(env_spec)
    if kind == "periodic":
        chain = build_chain(env_spec, lam, tail_tol)
        f_vec = observable_vector(chain, f_spec)
        res = _run_periodic_ensemble(
            env_spec, lam, n, replicas, seed, obs_vectors=(f_vec,), tail_tol=tail_tol
        )
        means = res.obs_sums[0] / n
        series = np.diff(res.obs_snapshots[0, 0], prepend=0.0) / np.diff(
            res.snap_steps, prepend=0
        )
        return _combine_replicas(means, seed, f"Q[{f_spec}]", batch_series=series)
    burn = n // 10
    means = []
    for r in range(replicas):
        sums, _, _ = _iid_replica_run(
            env_spec, lam, n, seed, r, (f_spec,), False, burn, tail_tol
        )
        means.append(sums[0] / n)
    return _combine_replicas(
        means, seed, f"Q[{f_spec}]", note=f"burn-in {burn} steps per replica"
    )


def estimate_velocity(env_spec, lam, n, replicas, seed=0, clock="discrete", tail_tol=1e-12) -> EstimateCI:
    """Empirical velocity: displacement over elapsed clock, per replica."""
    if clock not in ("discrete", "continuous"):
        raise ConfigError("clock must be 'discrete' or 'continuous'")
    continuous = clock == "continuous"
    kind = _require_spec_kind(env_spec)
    if replicas < 2:
        raise ConfigError("velocity needs >= 2 replicas for an error bar")
    label = f"v_{clock}"
    if kind == "periodic":
        res = _run_periodic_ensemble(
            env_spec, lam, n, replicas, seed, continuous=continuous, tail_tol=tail_tol
        )
        rates = res.disp / (res.time if continuous else n)
        return _combine_replicas(rates, seed, label)
    burn = n // 10
    rates = []
    for r in range(replicas):
        _, disp, elapsed = _iid_replica_run(
            env_spec, lam, n, seed, r, (), continuous, burn, tail_tol
        )
        rates.append(disp / (elapsed if continuous else n))
    return _combine_replicas(rates, seed, label, note=f"burn-in {burn} steps per replica")


def _group_stat_stderr(per_replica_rows, stat, n_groups=20):
    """(full-cloud statistic, group-spread standard error, group count).

    The point value uses every replica; disjoint replica groups re-evaluate
    the same statistic only to size its fluctuation, so the statistic must
    be unbiased at group size (no data-dependent weighting inside ``stat``).
    """
    r = per_replica_rows.shape[0]
    g = max(2, min(n_groups, r // 5))
    edges = np.linspace(0, r, g + 1).astype(int)
    vals = np.array([stat(per_replica_rows[a:b]) for a, b in zip(edges[:-1], edges[1:])])
    return float(stat(per_replica_rows)), float(np.std(vals, ddof=1) / math.sqrt(g)), g


def _wls_line(x, y, w):
    """Weighted least squares fit y = a + b x; returns (a, b, se_a, se_b)."""
    x, y, w = (np.asarray(v, dtype=float) for v in (x, y, w))
    X = np.stack([np.ones_like(x), x], axis=1)
    A = X.T @ (w[:, None] * X)
    b_vec = X.T @ (w * y)
    cov = np.linalg.inv(A)
    coef = cov @ b_vec
    return float(coef[0]), float(coef[1]), math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])


def estimate_diffusion(env_spec, n, replicas, seed=0, clock="discrete", tail_tol=1e-12) -> EstimateCI:
    """Diffusivity from the growth of the displacement variance.

    Variances at four clock checkpoints are fitted with a free-intercept
    weighted line; the slope is the estimate.  The error bar is the spread
    of the same fit over replica groups.
    """
    if clock not in ("discrete", "continuous"):
        raise ConfigError("clock must be 'discrete' or 'continuous'")
    kind = _require_spec_kind(env_spec)
    if replicas < 10:
        raise ConfigError("diffusion fitting needs >= 10 replicas")
    continuous = clock == "continuous"
    stride = max(1, n // 512)
    if kind == "periodic":
        res = _run_periodic_ensemble(
            env_spec,
            0.0,
            n,
            replicas,
            seed,
            continuous=continuous,
            record_stride=stride,
            tail_tol=tail_tol,
        )
        rec_clock, rec_disp = res.rec_clock, res.rec_disp
    else:
        rec_clock = np.zeros((replicas, n // stride + 1))
        rec_disp = np.zeros_like(rec_clock)
        for r in range(replicas):
            env = LazyEnvironment(env_spec.with_seed(derive_int(seed, "environment", r)))
            runner = run_continuous if continuous else run_discrete
            traj = runner(env, 0.0, n, derive_int(seed, "path", r), tail_tol=tail_tol)
            sel = np.arange(0, n + 1, stride)[: rec_clock.shape[1]]
            rec_disp[r] = traj.positions[sel] - traj.positions[0]
            rec_clock[r] = traj.times[sel] if continuous else sel

    if continuous:
        t_max = 0.9 * float(np.min(rec_clock[:, -1]))
        t_grid = t_max * np.array([0.25, 0.5, 0.75, 1.0])
        at = np.empty((replicas, 4))
        for r in range(replicas):
            pos_idx = np.searchsorted(rec_clock[r], t_grid, side="right") - 1
            at[r] = rec_disp[r, pos_idx]
    else:
        cols = np.searchsorted(rec_clock[0], np.array([0.25, 0.5, 0.75, 1.0]) * n)
        cols = np.clip(cols, 1, rec_clock.shape[1] - 1)
        t_grid = rec_clock[0, cols]
        at = rec_disp[:, cols]

    # The sampling noise of a sample variance scales with the variance
    # itself, here ~ D t, so 1/t^2 weights are the deterministic stand-in
    # for inverse-variance weighting.  Weights must not depend on the data:
    # a group's own noisy variance as its weight drags the fit low.
    fit_w = 1.0 / t_grid**2

    def slope_of(rows):
        var = rows.var(axis=0, ddof=1)
        _, b, _, _ = _wls_line(t_grid, var, fit_w)
        return b

    value, stderr, groups = _group_stat_stderr(at, slope_of)
    return EstimateCI(
        value=value,
        stderr=stderr,
        batches=groups,
        replicas=replicas,
        seed=seed,
        label=f"D_{clock}",
    )


@dataclass(frozen=True)
class CltReport:
    var_f: EstimateCI
    var_phi: EstimateCI
    cov: EstimateCI
    note: str = ""


def estimate_clt(env_spec, f_spec, n, replicas, seed=0, tail_tol=1e-12) -> CltReport:
    """Variances and covariance of the scaled additive pair (N^f, N^phi).

    Sums run over the unbiased environment chain and are divided by sqrt(n);
    second moments come from the replica cloud, error bars from replica
    groups.  On periodic environments both observables are centered exactly;
    for sampled environments f is centered empirically (a small O(1/sqrt(n))
    bias, recorded in the note).
    """
    kind = _require_spec_kind(env_spec)
    if replicas < 10:
        raise ConfigError("second-moment estimation needs >= 10 replicas")
    if kind == "periodic":
        chain = build_chain(env_spec, 0.0, tail_tol)
        q0 = reversible_law(chain)
        f_vec = observable_vector(chain, f_spec)
        f_vec = f_vec - float(q0 @ f_vec)
        phi = drift_vector(chain)
        phi = phi - float(q0 @ phi)
        res = _run_periodic_ensemble(
            env_spec, 0.0, n, replicas, seed, obs_vectors=(f_vec, phi), tail_tol=tail_tol
        )
        sf = res.obs_sums[0] / math.sqrt(n)
        sphi = res.obs_sums[1] / math.sqrt(n)
        note = "exact centering from the stationary law"
    else:
        raw = np.empty((replicas, 2))
        for r in range(replicas):
            sums, _, _ = _iid_replica_run(
                env_spec, 0.0, n, seed, r, (f_spec, "phi"), False, n // 10, tail_tol
            )
            raw[r] = sums
        means = raw.mean(axis=0) / n
        sf = (raw[:, 0] - n * means[0]) / math.sqrt(n)
        sphi = (raw[:, 1] - n * means[1]) / math.sqrt(n)
        note = "empirical centering; O(n^-1/2) bias"

    rows = np.stack([sf, sphi], axis=1)

    def make(stat, label):
        value, stderr, groups = _group_stat_stderr(rows, stat)
        return EstimateCI(
            value=value,
            stderr=stderr,
            batches=groups,
            replicas=replicas,
            seed=seed,
            label=label,
            note=note,
        )

    return CltReport(
        var_f=make(lambda r: r[:, 0].var(ddof=1), f"Var[N^{f_spec}]"),
        var_phi=make(lambda r: r[:, 1].var(ddof=1), "Var[N^phi]"),
        cov=make(lambda r: float(np.cov(r[:, 0], r[:, 1], ddof=1)[0, 1]), "Cov"),
        note=note,
    )


@dataclass(frozen=True)
class EinsteinMcReport:
    """Mobility extrapolation against the measured diffusivity."""

    rows: tuple  # (lam, v, v_se, mobility, mobility_se)
    intercept: float
    intercept_se: float
    slope: float
    d_hat: EstimateCI
    seed: int

    @property
    def z(self) -> float:
        width = math.hypot(self.intercept_se, self.d_hat.stderr)
        return abs(self.intercept - self.d_hat.value) / width

    @property
    def ratio(self) -> float:
        return self.intercept / self.d_hat.value

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"lam": l, "v": v, "v_se": vs, "mobility": m, "mobility_se": ms}
                for (l, v, vs, m, ms) in self.rows
            ],
            "intercept": self.intercept,
            "intercept_se": self.intercept_se,
            "slope": self.slope,
            "d_hat": self.d_hat.value,
            "d_se": self.d_hat.stderr,
            "z": self.z,
            "ratio": self.ratio,
            "seed": self.seed,
        }


def einstein_mc(env_spec, lam_grid=(0.02, 0.04, 0.08, 0.16), n=20000, replicas=100, seed=0, tail_tol=1e-12) -> EinsteinMcReport:
    """Fit mobility v(lam)/lam over small biases and extrapolate to zero.

    The weighted linear fit has a free slope, so the leading linear-response
    correction is absorbed and the intercept targets the zero-bias limit,
    which the Einstein relation equates with the diffusivity.
    """
    grid = sorted(float(l) for l in lam_grid)
    if not grid or grid[0] <= 0.0 or grid[-1] > 0.2:
        raise ConfigError("bias grid must lie in (0, 0.2]")
    rows = []
    for lam in grid:
        est = estimate_velocity(env_spec, lam, n, replicas, seed=derive_int(seed, "vel", round(lam * 1e6)), tail_tol=tail_tol)
        rows.append((lam, est.value, est.stderr, est.value / lam, est.stderr / lam))
    x = np.array([r[0] for r in rows])
    y = np.array([r[3] for r in rows])
    se = np.array([r[4] for r in rows])
    a, b, se_a, _ = _wls_line(x, y, 1.0 / se**2)
    d_hat = estimate_diffusion(env_spec, n, replicas, seed=derive_int(seed, "diff"), tail_tol=tail_tol)
    return EinsteinMcReport(
        rows=tuple(rows),
        intercept=a,
        intercept_se=se_a,
        slope=b,
        d_hat=d_hat,
        seed=seed,
    )


@dataclass(frozen=True)
class CalibrationReport:
    coverage: float
    n_trials: int
    level: float
    ar_coefficient: float

    def to_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "n_trials": self.n_trials,
            "level": self.level,
            "ar_coefficient": self.ar_coefficient,
        }


def ci_calibration(seed=0, n_trials=200, series_length=4000, ar=0.6) -> CalibrationReport:
    """Empirical coverage of the batch-means interval on a known chain.

    The synthetic series is a stationary AR(1) with mean zero; each trial
    asks whether the nominal 95% interval covers the truth.  Well below 0.95
    means the machinery is lying about its error bars.
    """
    if not 0.0 <= ar < 1.0:
        raise ConfigError("AR coefficient must lie in [0, 1)")
    from scipy.signal import lfilter

    hits = 0
    scale = math.sqrt(1.0 - ar * ar)
    for trial in range(n_trials):
        gen = spawn_generator(seed, "calibration", trial)
        noise = gen.standard_normal(series_length)
        drive = scale * noise
        drive[0] = noise[0]  # stationary start: x_0 ~ N(0, 1) exactly
        x = lfilter([1.0], [1.0, -ar], drive)
        mean, se, b = batch_means(x)
        hw = float(stats.t.ppf(0.5 + _LEVEL / 2, b - 1)) * se
        if abs(mean) <= hw:
            hits += 1
    return CalibrationReport(
        coverage=hits / n_trials, n_trials=n_trials, level=_LEVEL, ar_coefficient=ar
    )
