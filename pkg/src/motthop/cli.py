"""Command line entry point.

Each subcommand resolves its configuration, creates a run directory named by
the config hash (suffix-bumped, never overwritten), writes a manifest, and
emits CSV/JSON artifacts there; report-style subcommands also render PNG
figures unless --no-figures is given.

Exit codes: 0 success, 2 configuration or schema problems, 3 numerical
failures (with error.json in the run directory when one was created),
4 exhausted sampling budgets.  All randomness descends from the single
--seed value through purpose-keyed derivation, so identical configurations
reproduce identical CSV bytes; results never depend on --threads, which
only caps worker pools.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    env_to_dict,
    parse_env_spec,
    preset_names,
    prepare_run_dir,
    write_csv,
    write_json,
    write_manifest,
)
from .env import GeneratorSpec, LazyEnvironment, PeriodicEnvironment
from .errors import BudgetError, ConfigError, NumericsError
from .kernel import jump_law
from .mc import einstein_mc, estimate_clt, observable_vector
from .network import conductance_report, nn_series
from .oracle import (
    build_chain,
    derivative_two_ways,
    diffusion_spectral,
    diffusion_variational,
    einstein_check,
    exact_velocity,
    exact_velocity_ct,
    reversible_law,
    rn_diagnostics,
    slope_check,
    stationary,
)
from .rng import derive_int
from .walk import run_continuous, run_discrete, run_truncated

_STATIONARY_TOL = 1e-12
_DIFFUSION_TOL = 1e-9


def _parse_float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v)
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _parse_set(text: str):
    """Node-set grammar: '1,2', 'le:0', 'ge:4', or a ray union 'le:0|ge:4'."""
    parts = text.split("|")

    def one(part):
        if part.startswith(("le:", "ge:")):
            side, _, n = part.partition(":")
            try:
                return (side, int(n))
            except ValueError as exc:
                raise ConfigError(f"bad ray {part!r}") from exc
        try:
            return [int(v) for v in part.split(",") if v]
        except ValueError as exc:
            raise ConfigError(f"bad site list {part!r}") from exc

    if len(parts) == 1:
        return one(parts[0])
    union = [one(p) for p in parts]
    if not all(isinstance(s, tuple) for s in union):
        raise ConfigError("set unions are supported for rays only")
    return union


def _require_periodic(env, what: str) -> PeriodicEnvironment:
    if not isinstance(env, PeriodicEnvironment):
        raise ConfigError(f"{what} needs a periodic environment")
    return env


def _walk_env(env, seed: int):
    """Concrete environment for trajectory sampling."""
    if isinstance(env, GeneratorSpec):
        return LazyEnvironment(env.with_seed(derive_int(seed, "environment")))
    return env


def _centered_observable(penv, f_spec: str, tail_tol: float):
    chain = build_chain(penv, 0.0, tail_tol)
    f = observable_vector(chain, f_spec)
    return chain, f - float(reversible_law(chain) @ f)


# ---------------------------------------------------------------- handlers


def _run_gen_env(cfg: ExperimentConfig, env, run_dir: Path):
    if cfg.lo >= cfg.hi:
        raise ConfigError("need lo < hi")
    concrete = _walk_env(env, cfg.seed)
    pos, ener = concrete.arrays(cfg.lo, cfg.hi)
    sites = range(cfg.lo, cfg.hi + 1)
    write_csv(
        run_dir / "sites.csv",
        ["site", "position", "gap", "energy"],
        [(k, x, concrete.gap(k), e) for k, x, e in zip(sites, pos, ener)],
    )
    write_json(
        run_dir / "summary.json",
        {"sites": cfg.hi - cfg.lo + 1, "span": float(pos[-1] - pos[0])},
    )


def _run_kernel_dump(cfg: ExperimentConfig, env, run_dir: Path):
    concrete = _walk_env(env, cfg.seed)
    law = jump_law(concrete, cfg.lam, i=cfg.site, tail_tol=cfg.tail_tol)
    write_csv(
        run_dir / "law.csv",
        ["offset", "displacement", "probability"],
        zip(law.offsets, law.disp, law.probs),
    )
    write_json(
        run_dir / "law.json",
        {
            "site": cfg.site,
            "lam": cfg.lam,
            "pi": law.pi,
            "radius": law.radius,
            "tail_mass": law.tail_mass,
        },
    )


def _run_simulate(cfg: ExperimentConfig, env, run_dir: Path):
    concrete = _walk_env(env, cfg.seed)
    log = run_dir / "trajectory.bin"
    if cfg.clock == "continuous":
        traj = run_continuous(
            concrete, cfg.lam, cfg.steps, cfg.seed, log_path=log, tail_tol=cfg.tail_tol
        )
        elapsed = float(traj.times[-1])
    elif cfg.clock == "truncated":
        traj = run_truncated(
            concrete,
            cfg.lam,
            cfg.steps,
            cfg.seed,
            rho=cfg.rho,
            log_path=log,
            tail_tol=cfg.tail_tol,
        )
        elapsed = float(cfg.steps)
    elif cfg.clock == "discrete":
        traj = run_discrete(
            concrete, cfg.lam, cfg.steps, cfg.seed, log_path=log, tail_tol=cfg.tail_tol
        )
        elapsed = float(cfg.steps)
    else:
        raise ConfigError("clock must be discrete, continuous, or truncated")
    velocity = traj.displacement / elapsed if elapsed > 0 else 0.0
    write_csv(
        run_dir / "summary.csv",
        ["steps", "displacement", "elapsed", "velocity"],
        [(traj.n_steps, traj.displacement, elapsed, velocity)],
    )
    if cfg.figures:
        from .figures import save_trajectory

        save_trajectory(run_dir / "trajectory.png", traj)


def _run_conductance(cfg: ExperimentConfig, env, run_dir: Path):
    concrete = _walk_env(env, cfg.seed)
    if not cfg.set_a or not cfg.set_b:
        raise ConfigError("conductance needs --a and --b node sets")
    a_spec, b_spec = _parse_set(cfg.set_a), _parse_set(cfg.set_b)
    report = conductance_report(
        concrete, cfg.lam, cfg.rho, a_spec, b_spec, (cfg.lo, cfg.hi)
    )
    rows = [
        ("value", report.value),
        ("log_value", report.log_value),
        ("sensitivity", report.sensitivity),
    ]
    for v_lo, v_hi, value in report.variants:
        rows.append((f"variant[{v_lo},{v_hi}]", value))
    if cfg.site > 0:
        rows.append(
            (f"nn_series[{cfg.site}]", nn_series(concrete, cfg.lam, cfg.site, cfg.rho))
        )
    write_csv(run_dir / "conductance.csv", ["quantity", "value"], rows)
    write_json(run_dir / "report.json", report.to_dict())


def _check_stationary(penv, cfg):
    rows = []
    worst = 0.0
    for lam in (0.0, 0.2, 0.5):
        chain = build_chain(penv, lam, cfg.tail_tol)
        q = stationary(chain)
        resid = float(np.max(np.abs(q @ chain.P - q)))
        rows.append((f"stationarity_residual[{lam:g}]", resid))
        worst = max(worst, resid)
    chain = build_chain(penv, 0.0, cfg.tail_tol)
    q = stationary(chain)
    q0 = reversible_law(chain)
    flow = q[:, None] * chain.P
    db = float(np.max(np.abs(flow - flow.T)) / max(float(np.max(flow)), 1e-300))
    prop = float(np.max(np.abs(q - q0)))
    rows.append(("detailed_balance_residual", db))
    rows.append(("reversible_law_gap", prop))
    worst = max(worst, db, prop)
    if worst > _STATIONARY_TOL:
        raise NumericsError(f"stationarity checks exceed {_STATIONARY_TOL}: {worst:g}")
    return rows


def _check_velocity(penv, cfg):
    v = exact_velocity(penv, cfg.lam, cfg.tail_tol)
    v_ct = exact_velocity_ct(penv, cfg.lam, cfg.tail_tol)
    chain = build_chain(penv, cfg.lam, cfg.tail_tol)
    q = stationary(chain)
    hold = float(q @ (1.0 / chain.pi))
    resid = abs(v_ct * hold - v) / max(abs(v), 1e-300) if v != 0.0 else abs(v_ct)
    if resid > 1e-9:
        raise NumericsError(f"clock identity residual {resid:g}")
    return [
        (f"velocity[{cfg.lam:g}]", v),
        (f"velocity_ct[{cfg.lam:g}]", v_ct),
        ("mean_hold", hold),
        ("clock_identity_residual", resid),
    ]


def _check_diffusion(penv, cfg):
    d_spec, d_ct = diffusion_spectral(penv, cfg.tail_tol)
    d_var = diffusion_variational(penv, cfg.tail_tol)
    gap = abs(d_spec - d_var) / max(abs(d_spec), 1e-300)
    if gap > _DIFFUSION_TOL:
        raise NumericsError(f"variational vs spectral diffusivity gap {gap:g}")
    return [
        ("diffusivity_spectral", d_spec),
        ("diffusivity_variational", d_var),
        ("route_gap_rel", gap),
        ("diffusivity_ct", d_ct),
        ("clock_factor", d_ct / d_spec),
    ]


def _check_derivatives(penv, cfg):
    _, f = _centered_observable(penv, cfg.f_spec, cfg.tail_tol)
    rep = derivative_two_ways(penv, f, tail_tol=cfg.tail_tol)
    return [
        ("sole", rep.sole),
        ("luna", rep.luna),
        ("gap_rel", rep.gap),
        ("covariance", rep.covariance),
        ("var_f", rep.var_f),
        ("var_phi", rep.var_phi),
        ("residual_mixed", rep.ballo1_residual),
        ("residual_position", rep.ballo2_residual),
    ]


def _check_einstein(penv, cfg):
    rep = einstein_check(penv, cfg.h)
    # Central differences are second order; allow a generous prefactor
    # before declaring the derivative check broken.
    if rep.gap_y > 10.0 * cfg.h**2 * (1.0 + abs(rep.d_y)):
        raise NumericsError(f"mobility FD off by {rep.gap_y:g} at h={cfg.h:g}")
    return [
        ("h", rep.h),
        ("diffusivity", rep.d_y),
        ("diffusivity_ct", rep.d_ct),
        ("mobility_fd", rep.fd_y),
        ("mobility_fd_ct", rep.fd_ct),
        ("gap", rep.gap_y),
        ("gap_ct", rep.gap_ct),
        ("richardson_gap", abs(rep.richardson_y - rep.d_y)),
    ]


_CHECKS = {
    "stationary": _check_stationary,
    "velocity": _check_velocity,
    "diffusion": _check_diffusion,
    "derivatives": _check_derivatives,
    "einstein": _check_einstein,
}


def _run_oracle(cfg: ExperimentConfig, env, run_dir: Path):
    penv = _require_periodic(env, "oracle checks")
    rows = _CHECKS[cfg.check](penv, cfg)
    write_csv(run_dir / "oracle.csv", ["quantity", "value"], rows)
    write_json(
        run_dir / "oracle.json",
        {"check": cfg.check, "passed": True, "values": {k: v for k, v in rows}},
    )


def _run_einstein(cfg: ExperimentConfig, env, run_dir: Path):
    penv = _require_periodic(env, "the exact mobility scan")
    grid = cfg.h_grid or (1e-2, 5e-3, 2.5e-3, 1.25e-3)
    rows = []
    for h in sorted(grid, reverse=True):
        rep = einstein_check(penv, h)
        rows.append((h, rep.fd_y, rep.gap_y, abs(rep.richardson_y - rep.d_y)))
    write_csv(
        run_dir / "einstein.csv",
        ["h", "mobility_fd", "gap", "richardson_gap"],
        rows,
    )
    d_y, d_ct = diffusion_spectral(penv, cfg.tail_tol)
    write_json(
        run_dir / "einstein.json",
        {"diffusivity": d_y, "diffusivity_ct": d_ct, "clock_factor": d_ct / d_y},
    )
    if cfg.figures:
        from .figures import save_einstein_scan

        save_einstein_scan(run_dir / "einstein.png", [(r[0], r[2]) for r in rows])


def _run_einstein_mc(cfg: ExperimentConfig, env, run_dir: Path):
    grid = cfg.lam_grid or (0.02, 0.04, 0.08, 0.16)
    rep = einstein_mc(
        env,
        lam_grid=grid,
        n=cfg.steps,
        replicas=cfg.replicas,
        seed=cfg.seed,
        tail_tol=cfg.tail_tol,
    )
    write_csv(
        run_dir / "mobility.csv",
        ["lam", "velocity", "velocity_stderr", "mobility", "mobility_stderr"],
        rep.rows,
    )
    write_json(run_dir / "summary.json", rep.to_dict())
    if cfg.figures:
        from .figures import save_mobility_fit

        save_mobility_fit(run_dir / "mobility.png", rep)


def _run_rn_scan(cfg: ExperimentConfig, env, run_dir: Path):
    penv = _require_periodic(env, "steady-state density diagnostics")
    grid = cfg.lam_grid or (0.02, 0.05, 0.1, 0.2, 0.35, 0.5)
    diag = rn_diagnostics(penv, grid, p=cfg.p, tail_tol=cfg.tail_tol)
    write_csv(
        run_dir / "rn.csv",
        ["lam", "lp_norm", "sup_density", "meta_ratio"],
        diag.rows,
    )
    _, f = _centered_observable(penv, cfg.f_spec, cfg.tail_tol)
    slope, exact, rel_gap = slope_check(penv, f, tail_tol=cfg.tail_tol)
    write_json(
        run_dir / "rn.json",
        {
            "p": cfg.p,
            "sup_lp": diag.sup_lp,
            "continuity_slope": slope,
            "continuity_exact": exact,
            "continuity_rel_gap": rel_gap,
        },
    )
    if cfg.figures:
        from .figures import save_rn_scan

        save_rn_scan(run_dir / "rn.png", diag.rows, cfg.p)


def _run_clt(cfg: ExperimentConfig, env, run_dir: Path):
    out = estimate_clt(
        env, cfg.f_spec, n=cfg.steps, replicas=cfg.replicas, seed=cfg.seed,
        tail_tol=cfg.tail_tol,
    )
    truths = {"var_f": None, "var_phi": None, "cov": None}
    if isinstance(env, PeriodicEnvironment):
        _, f = _centered_observable(env, cfg.f_spec, cfg.tail_tol)
        rep = derivative_two_ways(env, f, tail_tol=cfg.tail_tol)
        truths = {"var_f": rep.var_f, "var_phi": rep.var_phi, "cov": rep.covariance}
    rows = []
    for key, est in (("var_f", out.var_f), ("var_phi", out.var_phi), ("cov", out.cov)):
        truth = truths[key]
        z = est.z(truth) if truth is not None else ""
        rows.append((key, est.value, est.stderr, est.batches, truth if truth is not None else "", z))
    write_csv(
        run_dir / "clt.csv",
        ["quantity", "estimate", "stderr", "batches", "exact", "z"],
        rows,
    )
    write_json(
        run_dir / "clt.json",
        {
            "note": out.note,
            "estimates": {k: e.to_row() for k, e in
                          (("var_f", out.var_f), ("var_phi", out.var_phi), ("cov", out.cov))},
            "exact": truths,
        },
    )
    if cfg.figures:
        from .figures import save_interval_bars

        save_interval_bars(
            run_dir / "clt.png",
            [(r[0], r[1], r[2], truths[r[0]]) for r in rows],
        )


_HANDLERS = {
    "gen-env": _run_gen_env,
    "kernel-dump": _run_kernel_dump,
    "simulate": _run_simulate,
    "conductance": _run_conductance,
    "oracle": _run_oracle,
    "einstein": _run_einstein,
    "einstein-mc": _run_einstein_mc,
    "rn-scan": _run_rn_scan,
    "clt": _run_clt,
}


# ---------------------------------------------------------------- parsing


def _add_common(sp, default_env=None):
    sp.add_argument(
        "--env",
        default=default_env,
        required=default_env is None,
        help=f"preset ({', '.join(preset_names())}) or periodic:/iid: description",
    )
    sp.add_argument("--seed", type=int, default=0, help="64-bit master seed")
    sp.add_argument("--outdir", default="runs", help="parent directory for run outputs")
    sp.add_argument("--tail-tol", dest="tail_tol", type=float, default=1e-12)
    sp.add_argument("--threads", type=int, default=1, help="worker pool cap")
    sp.add_argument(
        "--no-figures",
        dest="figures",
        action="store_false",
        help="skip PNG rendering",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motthop",
        description="Biased hopping among random marked points: samplers, "
        "exact chain checks, and network solvers.",
    )
    parser.add_argument("--version", action="version", version=f"motthop {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sp = subs.add_parser("gen-env", help="materialize an environment window to CSV")
    _add_common(sp)
    sp.add_argument("--lo", type=int, default=-10)
    sp.add_argument("--hi", type=int, default=10)

    sp = subs.add_parser("kernel-dump", help="jump law out of one site")
    _add_common(sp)
    sp.add_argument("--lam", type=float, default=0.0)
    sp.add_argument("--site", type=int, default=0)

    sp = subs.add_parser("simulate", help="sample one trajectory, log it, summarize")
    _add_common(sp)
    sp.add_argument("--lam", type=float, default=0.0)
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument(
        "--clock", choices=("discrete", "continuous", "truncated"), default="discrete"
    )
    sp.add_argument("--rho", type=int, default=4, help="jump cutoff for --clock truncated")

    sp = subs.add_parser("conductance", help="effective conductance between node sets")
    _add_common(sp)
    sp.add_argument("--lam", type=float, default=0.0)
    sp.add_argument("--rho", type=int, default=4)
    sp.add_argument("--a", dest="set_a", default="", help="source set (e.g. 0 or le:0)")
    sp.add_argument("--b", dest="set_b", default="", help="sink set (e.g. ge:4)")
    sp.add_argument("--lo", type=int, default=-10, help="window start")
    sp.add_argument("--hi", type=int, default=10, help="window end")
    sp.add_argument(
        "--series",
        dest="site",
        type=int,
        default=0,
        help="also sum nearest-neighbour resistances from this site to rho-1",
    )

    sp = subs.add_parser("oracle", help="exact finite-period chain checks")
    _add_common(sp, default_env="period1-lattice")
    sp.add_argument("--check", choices=sorted(_CHECKS), required=True)
    sp.add_argument("--lam", type=float, default=0.3)
    sp.add_argument("--h", type=float, default=1e-3)
    sp.add_argument("--f-spec", dest="f_spec", default="pi")

    sp = subs.add_parser("einstein", help="mobility finite differences, exact chain")
    _add_common(sp, default_env="period1-lattice")
    sp.add_argument("--h-grid", dest="h_grid", default="", help="comma list of steps")

    sp = subs.add_parser("einstein-mc", help="sampled mobility vs sampled diffusivity")
    _add_common(sp)
    sp.add_argument("--lam-grid", dest="lam_grid", default="")
    sp.add_argument("--steps", type=int, default=20000)
    sp.add_argument("--replicas", type=int, default=100)

    sp = subs.add_parser("rn-scan", help="biased steady-state density diagnostics")
    _add_common(sp)
    sp.add_argument("--lam-grid", dest="lam_grid", default="")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--f-spec", dest="f_spec", default="pi")

    sp = subs.add_parser("clt", help="sampled additive-pair limit vs exact values")
    _add_common(sp)
    sp.add_argument("--f-spec", dest="f_spec", default="pi")
    sp.add_argument("--steps", type=int, default=20000)
    sp.add_argument("--replicas", type=int, default=100)

    return parser


def config_from_args(args) -> ExperimentConfig:
    fields = {"subcommand": args.subcommand, "env": args.env}
    for name in (
        "lam",
        "steps",
        "replicas",
        "seed",
        "outdir",
        "tail_tol",
        "h",
        "rho",
        "p",
        "f_spec",
        "clock",
        "check",
        "site",
        "lo",
        "hi",
        "set_a",
        "set_b",
        "figures",
        "threads",
    ):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    for name in ("lam_grid", "h_grid"):
        if hasattr(args, name):
            fields[name] = _parse_float_list(getattr(args, name))
    return ExperimentConfig(**fields)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run_dir = None
    try:
        cfg = config_from_args(args)
        env = parse_env_spec(cfg.env)
        run_dir = prepare_run_dir(cfg)
        write_manifest(run_dir, cfg, env)
        _HANDLERS[cfg.subcommand](cfg, env, run_dir)
    except ConfigError as exc:
        print(f"motthop: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"motthop: numerical failure: {exc}", file=sys.stderr)
        if run_dir is not None:
            write_json(
                run_dir / "error.json",
                {"type": "NumericsError", "message": str(exc)},
            )
        return 3
    except BudgetError as exc:
        print(f"motthop: budget exhausted: {exc}", file=sys.stderr)
        if run_dir is not None:
            write_json(
                run_dir / "error.json",
                {"type": "BudgetError", "message": str(exc)},
            )
        return 4
    print(run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
