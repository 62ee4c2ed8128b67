# qpdl/main.py

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import click
import numpy as np
import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from qpdl.config import configure_logging, merge_overrides, read_config_file
from qpdl.errors import NumericalContractError
from qpdl.schemas import PotentialSpec, RunConfig

from qpdl.modules.cocycle import lyapunov_exponents, rotation_numbers
from qpdl.modules.contract_engine import ContractEngine
from qpdl.modules.explainability import generate_report
from qpdl.modules.kam import partition_spectrum, reduce, schedule_for, xi_derivative_diagnostics
from qpdl.modules.lattice_operator import LatticeState, detect_gaps, ids_curve
from qpdl.modules.nls import bootstrap_check, bootstrap_run
from qpdl.modules.oscillatory import fuzz_bounds, spectral_osc_integral
from qpdl.modules.potential import FourierSeries, cosine, from_triples, random_analytic, zero
from qpdl.modules.propagator import decay_profile, dyadic_times, evolve
from qpdl.modules.spectral_transform import (
    build_spectral_grid,
    frame_bounds,
    random_samples,
    roundtrip_error,
    spectral_transform,
)
from qpdl.modules.torus_freq import Frequency
from qpdl.modules.workers import parallel_map

logger = logging.getLogger("qpdl.main")
console = Console()

XI_STENCIL_STEP = 1e-3


@dataclass
class StageResult:
    frames: Dict[str, pd.DataFrame]
    summary: Dict
    measurements: Dict[str, Optional[float]] = field(default_factory=dict)


# ===============================
# Builders
# ===============================

def build_frequency(cfg: RunConfig) -> Frequency:
    spec = cfg.frequency
    return Frequency(tuple(spec.omega), spec.gamma, spec.tau, spec.k_check)


def build_potential(spec: PotentialSpec, d: int) -> FourierSeries:
    if spec.kind == "zero":
        return zero(d)
    if spec.kind == "cosine":
        return cosine(spec.eps, d, radius=spec.radius)
    if spec.kind == "random":
        return random_analytic(spec.eps, spec.radius, spec.k_max, spec.seed, d)

    group = d + 2
    if len(spec.table) % group:
        raise ValueError(f"potential table must hold groups of {group} numbers (k_1..k_{d}, re, im)")
    triples = [
        (spec.table[i:i + d], spec.table[i + d], spec.table[i + d + 1])
        for i in range(0, len(spec.table), group)
    ]
    return from_triples(triples, d, spec.radius)


def build_theta(value: float, d: int):
    return value if d == 1 else np.full(d, value)


def build_datum(cfg: RunConfig, N: int) -> LatticeState:
    if cfg.run.datum == "gaussian":
        # keep five widths on the window
        return LatticeState.gaussian(max(N, int(math.ceil(5 * cfg.run.width))), cfg.run.width)
    return LatticeState.delta(N)


def energy_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.grid.emin, cfg.grid.emax, cfg.grid.points)


# ===============================
# Artifacts
# ===============================

def _to_builtin(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")


def write_csv(path: Path, frame: pd.DataFrame, command: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {command}: {', '.join(frame.columns)}\n")
        frame.to_csv(fh, index=False, float_format="%.12g", lineterminator="\n")


def write_json(path: Path, payload: Dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_to_builtin)
        fh.write("\n")


# ===============================
# Pipeline
# ===============================

def load_config(ctx: click.Context, overrides: Dict[str, Dict]) -> RunConfig:
    sections = read_config_file(ctx.obj["config"]) if ctx.obj["config"] else {}
    merged = merge_overrides(sections, {"run": ctx.obj["run"]})
    merged = merge_overrides(merged, overrides)
    return RunConfig.model_validate(merged)


def run_stage(ctx: click.Context, command: str, overrides: Dict[str, Dict],
              body: Callable[[RunConfig], StageResult]) -> None:

    # -------------------------------------------------
    # 1️⃣ Configuration
    # -------------------------------------------------
    try:
        cfg = load_config(ctx, overrides)
        limits = ContractEngine(cfg.tolerances.model_dump())
    except (ValueError, ValidationError) as e:
        click.echo(f"Invalid configuration: {e}", err=True)
        ctx.exit(2)

    out = cfg.run.out
    logger.info("# ---- %s (seed %d)", command, cfg.run.seed)

    # -------------------------------------------------
    # 2️⃣ Computation
    # -------------------------------------------------
    try:
        result = body(cfg)
    except NumericalContractError as e:
        logger.error("%s aborted: %s", command, e)
        contract = {"verdict": "FAIL", "violations": [e.contract], "breakdown": {}}
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / f"{command}.json", {
            "command": command,
            "summary": {"error": str(e)},
            "contract": contract,
            "report": generate_report(command, {}, contract),
        })
        ctx.exit(3)
    except ValueError as e:
        click.echo(f"{command}: {e}", err=True)
        ctx.exit(2)

    # -------------------------------------------------
    # 3️⃣ Contracts and report
    # -------------------------------------------------
    contract = limits.compute(result.measurements)
    report = generate_report(command, result.summary, contract)

    out.mkdir(parents=True, exist_ok=True)
    for name, frame in result.frames.items():
        write_csv(out / f"{name}.csv", frame, command)
    write_json(out / f"{command}.json", {
        "command": command,
        "summary": result.summary,
        "contract": contract,
        "report": report,
    })

    for line in report["explanation"]:
        logger.info(line)

    if contract["verdict"] != "PASS":
        ctx.exit(3)


# ===============================
# Command group
# ===============================

@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
              default=None, help="Run-config file (key = value with [section] headers).")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Artifact directory (default out/).")
@click.option("--seed", type=int, default=None)
@click.option("--log-level", default=None, help="Overrides QPDL_LOG_LEVEL.")
@click.pass_context
def cli(ctx, config_path, out, seed, log_level):
    """Quasi-periodic dispersive laboratory."""
    try:
        configure_logging(log_level)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--log-level")
    ctx.obj = {"config": config_path, "run": {"out": out, "seed": seed}}


def floats(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}")


# ===============================
# rotno / ids
# ===============================

@cli.command()
@click.option("--emin", type=float)
@click.option("--emax", type=float)
@click.option("--points", type=int)
@click.option("--nmax", type=int)
@click.option("--eps", type=float)
@click.pass_context
def rotno(ctx, emin, emax, points, nmax, eps):
    """Rotation number and Lyapunov exponent on an energy grid."""

    def body(cfg: RunConfig) -> StageResult:
        freq = build_frequency(cfg)
        V = build_potential(cfg.potential, freq.d)
        theta = build_theta(cfg.grid.theta, freq.d)
        energies = energy_grid(cfg)

        rho, osc = rotation_numbers(energies, V, theta, freq, cfg.grid.nmax)
        lyap = lyapunov_exponents(energies, V, theta, freq, min(cfg.grid.nmax, 10_000))

        tolerance = 2.0 * float(osc.max())
        frame = pd.DataFrame({"E": energies, "rho": rho, "oscillation": osc, "lyapunov": lyap})
        summary = {
            "max_oscillation": float(osc.max()),
            "monotone": bool(np.all(np.diff(rho) >= -tolerance)),
        }
        return StageResult({"rotno": frame}, summary)

    run_stage(ctx, "rotno", {
        "grid": {"emin": emin, "emax": emax, "points": points, "nmax": nmax},
        "potential": {"eps": eps},
    }, body)


@cli.command()
@click.option("--emin", type=float)
@click.option("--emax", type=float)
@click.option("--points", type=int)
@click.option("--N", "N", type=int)
@click.option("--theta-samples", type=int)
@click.option("--eps", type=float)
@click.option("--gaps/--no-gaps", default=True, help="Also locate and label spectral gaps.")
@click.pass_context
def ids(ctx, emin, emax, points, N, theta_samples, eps, gaps):
    """Integrated density of states from truncated spectra."""

    def body(cfg: RunConfig) -> StageResult:
        freq = build_frequency(cfg)
        V = build_potential(cfg.potential, freq.d)
        theta = build_theta(cfg.grid.theta, freq.d)
        energies = energy_grid(cfg)

        curve = ids_curve(energies, V, freq, cfg.grid.N, cfg.grid.theta_samples, theta)
        frame = pd.DataFrame({"E": energies, "ids": curve, "pi_ids": math.pi * curve})

        summary: Dict = {}
        if gaps:
            found = detect_gaps(V, freq, cfg.grid.N, cfg.grid.resolution,
                                cfg.grid.theta_samples, theta)
            summary["gaps"] = [
                {"lower": g.lower, "upper": g.upper, "width": g.width,
                 "rotation": g.rotation, "k": list(g.label), "label_distance": g.label_distance}
                for g in sorted(found.gaps, key=lambda g: -g.width)
            ]
        return StageResult({"ids": frame}, summary)

    run_stage(ctx, "ids", {
        "grid": {"emin": emin, "emax": emax, "points": points, "N": N,
                 "theta_samples": theta_samples},
        "potential": {"eps": eps},
    }, body)


# ===============================
# KAM
# ===============================

def _step_table(steps) -> Table:
    table = Table(title="KAM steps")
    for column in ("j", "N_j", "|F_j|", "|F_j+1|", "resonance", "xi", "rho", "residual"):
        table.add_column(column, justify="right")
    for s in steps:
        table.add_row(str(s.j), str(s.order), f"{s.norm_before:.3e}", f"{s.norm_after:.3e}",
                      str(s.resonance) if any(s.resonance) else "-",
                      f"{s.xi:.8f}", f"{s.rho:.8f}", f"{s.residual:.2e}")
    return table


@cli.command("kam-reduce")
@click.option("--E", "E", type=float)
@click.option("--J", "J", type=int)
@click.option("--eps0", type=float)
@click.option("--nmin", type=int)
@click.option("--eps", type=float)
@click.pass_context
def kam_reduce(ctx, E, J, eps0, nmin, eps):
    """J-step reduction at one energy, printed as a step table."""

    def body(cfg: RunConfig) -> StageResult:
        freq = build_frequency(cfg)
        V = build_potential(cfg.potential, freq.d)
        sched = schedule_for(V, cfg.schedule.J, cfg.schedule.n_min, cfg.potential.radius,
                             cfg.schedule.eps0)
        state = reduce(cfg.run.E, V, freq, sched, cfg.schedule.J,
                       band_scale=cfg.schedule.band_scale, radius=cfg.potential.radius)
        console.print(_step_table(state.steps))

        stencil = [
            reduce(cfg.run.E + i * XI_STENCIL_STEP, V, freq, sched, cfg.schedule.J,
                   band_scale=cfg.schedule.band_scale, radius=cfg.potential.radius)
            for i in range(-2, 3)
        ]
        try:
            diag = xi_derivative_diagnostics(stencil)
            diagnostics = {"xi_prime": diag.xi_prime, "identity_error": diag.identity_error,
                           "window_ok": diag.window_ok,
                           "second_window_ok": diag.second_window_ok,
                           "window_applies": diag.window_applies, "sin_flag": diag.sin_flag}
        except ValueError as e:
            logger.warning("No derivative diagnostics at E=%.6f: %s", cfg.run.E, e)
            diagnostics = None

        frame = pd.DataFrame([
            {"j": s.j, "order": s.order, "norm_before": s.norm_before, "norm_after": s.norm_after,
             "resonance": " ".join(str(x) for x in s.resonance), "xi": s.xi, "rho": s.rho,
             "residual": s.residual}
            for s in state.steps
        ], columns=["j", "order", "norm_before", "norm_after", "resonance", "xi", "rho", "residual"])
        summary = {
            "E": cfg.run.E,
            "epsilons": list(sched.epsilons),
            "orders": list(sched.orders),
            "steps": [{"j": s.j, "resonance": any(s.resonance), "norm_after": s.norm_after}
                      for s in state.steps],
            "xi": state.xi,
            "rho": state.rho,
            "alpha_imaginary": state.alpha_imaginary,
            "layer": state.layer,
            "diagnostics": diagnostics,
        }
        residual = max((s.residual for s in state.steps), default=None)
        return StageResult({"kam-reduce": frame}, summary, {"conjugacy_residual": residual})

    run_stage(ctx, "kam-reduce", {
        "run": {"E": E},
        "schedule": {"J": J, "eps0": eps0, "n_min": nmin},
        "potential": {"eps": eps},
    }, body)


@cli.command("kam-partition")
@click.option("--emin", type=float)
@click.option("--emax", type=float)
@click.option("--points", type=int)
@click.option("--J", "J", type=int)
@click.option("--eps", type=float)
@click.pass_context
def kam_partition(ctx, emin, emax, points, J, eps):
    """Resonance-layer label of every grid energy."""

    def body(cfg: RunConfig) -> StageResult:
        freq = build_frequency(cfg)
        V = build_potential(cfg.potential, freq.d)
        sched = schedule_for(V, cfg.schedule.J, cfg.schedule.n_min, cfg.potential.radius,
                             cfg.schedule.eps0)
        partition = partition_spectrum(V, freq, sched, cfg.schedule.J, energy_grid(cfg),
                                       band_scale=cfg.schedule.band_scale)

        frame = pd.DataFrame({
            "E": partition.energies, "layer": partition.layers, "xi": partition.xi,
            "rho_J": partition.rho, "alpha_imag_flag": partition.alpha_imaginary.astype(int),
        })
        counts = np.bincount(partition.layers, minlength=cfg.schedule.J + 1)
        summary = {
            "component_count": partition.component_count,
            "component_bound": partition.component_bound,
            "within_bound": partition.within_bound,
            "layers": {str(j): int(c) for j, c in enumerate(counts)},
            "layer_measure": {str(j): m for j, m in partition.layer_measure.items()},
        }
        return StageResult({"kam-partition": frame}, summary)

    run_stage(ctx, "kam-partition", {
        "grid": {"emin": emin, "emax": emax, "points": points},
        "schedule": {"J": J},
        "potential": {"eps": eps},
    }, body)


# ===============================
# Spectral transform / oscillatory integrals
# ===============================

def _spectral_setup(cfg: RunConfig):
    freq = build_frequency(cfg)
    V = build_potential(cfg.potential, freq.d)
    theta = build_theta(cfg.grid.theta, freq.d)
    sched = schedule_for(V, cfg.schedule.J, cfg.schedule.n_min, cfg.potential.radius,
                         cfg.schedule.eps0)
    grid = build_spectral_grid(V, freq, theta, energy_grid(cfg), cfg.grid.N, sched,
                               cfg.schedule.J, n_rotation=cfg.grid.nmax,
                               band_scale=cfg.schedule.band_scale)
    return freq, V, theta, sched, grid


@cli.command("spectral-roundtrip")
@click.option("--eps", type=float)
@click.option("--J", "J", type=int)
@click.option("--grid-points", type=int)
@click.option("--window", type=int)
@click.option("--samples", type=int)
@click.pass_context
def spectral_roundtrip(ctx, eps, J, grid_points, window, samples):
    """Frame bounds and round-trip error of the discrete spectral transform."""

    def body(cfg: RunConfig) -> StageResult:
        _, _, _, _, grid = _spectral_setup(cfg)
        states = random_samples(cfg.grid.N, max(1, cfg.grid.N // 4), cfg.run.samples,
                                cfg.run.seed)
        lower, upper = frame_bounds(states, grid)
        errors = [roundtrip_error(q, grid) for q in states]
        console.print(f"frame bounds [{lower:.6f}, {upper:.6f}], "
                      f"round-trip error {max(errors):.3e}")

        G = spectral_transform(states[0], grid)
        frame = pd.DataFrame({
            "E": grid.energies, "rho": grid.rho, "rho_prime": grid.rho_prime,
            "g1_re": G.g1.real, "g1_im": G.g1.imag, "g2_re": G.g2.real, "g2_im": G.g2.imag,
        })
        summary = {
            "frame_bounds": [lower, upper],
            "roundtrip_errors": errors,
            "lost_mass": grid.lost_mass,
            "coarse_grid": grid.coarse,
            "valid_energies": int(grid.valid.sum()),
        }
        measurements = {
            "frame_deviation": max(abs(1.0 - lower), abs(upper - 1.0)),
            "roundtrip_error": max(errors),
            "lost_mass": grid.lost_mass,
        }
        return StageResult({"spectral-roundtrip": frame}, summary, measurements)

    run_stage(ctx, "spectral-roundtrip", {
        "potential": {"eps": eps},
        "schedule": {"J": J},
        "grid": {"points": grid_points, "N": window},
        "run": {"samples": samples},
    }, body)


@cli.command("osc-check")
@click.option("--eps", type=float)
@click.option("--J", "J", type=int)
@click.option("--t-list", type=str)
@click.option("--M-list", "M_list", type=str)
@click.option("--grid-points", type=int)
@click.option("--trials", type=int, help="Additional fuzzed (M, t, h) triples.")
@click.pass_context
def osc_check(ctx, eps, J, t_list, M_list, grid_points, trials):
    """Direct spectral oscillatory integrals against their certified bounds."""

    def body(cfg: RunConfig) -> StageResult:
        freq, V, _, sched, grid = _spectral_setup(cfg)
        partition = partition_spectrum(V, freq, sched, cfg.schedule.J, grid.energies,
                                       band_scale=cfg.schedule.band_scale)
        ones = np.ones_like(grid.energies)

        rows = []
        for t in cfg.run.t_list:
            for M in cfg.run.M_list:
                r = spectral_osc_integral(ones, M, t, grid, partition, sched, cfg.schedule.J)
                rows.append({"t": t, "M": M, "direct_re": r.direct.real,
                             "direct_im": r.direct.imag, "bound": r.bound,
                             "violated_flag": int(r.violated)})
        fuzzed = fuzz_bounds(grid, partition, sched, cfg.schedule.J, cfg.run.trials, cfg.run.seed)

        frame = pd.DataFrame(rows, columns=["t", "M", "direct_re", "direct_im", "bound",
                                            "violated_flag"])
        violations = int(frame["violated_flag"].sum()) + sum(r.violated for r in fuzzed)
        summary = {
            "component_count": partition.component_count,
            "within_bound": partition.within_bound,
            "layers": {str(j): int(c) for j, c in
                       enumerate(np.bincount(partition.layers, minlength=cfg.schedule.J + 1))},
            "fuzz_trials": len(fuzzed),
            "flagged": int(sum(r.flagged > 0 for r in fuzzed)),
            "unflagged_violations": violations,
        }
        return StageResult({"osc-check": frame}, summary, {"bound_violations": violations})

    run_stage(ctx, "osc-check", {
        "potential": {"eps": eps},
        "schedule": {"J": J},
        "grid": {"points": grid_points},
        "run": {"t_list": floats(t_list), "M_list": floats(M_list), "trials": trials},
    }, body)


# ===============================
# Linear and nonlinear evolution
# ===============================

@cli.command("evolve")
@click.option("--eps", type=float)
@click.option("--t", "t", type=float)
@click.option("--datum", type=click.Choice(["delta", "gaussian"]))
@click.option("--width", type=float)
@click.option("--N", "N", type=int)
@click.pass_context
def evolve_command(ctx, eps, t, datum, width, N):
    """e^{-itH} applied to a delta or gaussian datum."""

    def body(cfg: RunConfig) -> StageResult:
        freq = build_frequency(cfg)
        V = build_potential(cfg.potential, freq.d)
        theta = build_theta(cfg.grid.theta, freq.d)
        q0 = build_datum(cfg, cfg.grid.N)
        q = evolve(q0, cfg.run.t, V, theta, freq)

        frame = pd.DataFrame({"n": q.sites, "re": q.values.real, "im": q.values.imag,
                              "abs": np.abs(q.values)})
        drift = abs(q.l2() / q0.l2() - 1.0)
        summary = {"t": cfg.run.t, "sup_norm": q.sup(), "l2_norm": q.l2(), "N": q.N}
        return StageResult({"evolve": frame}, summary, {"unitarity_drift": drift})

    run_stage(ctx, "evolve", {
        "potential": {"eps": eps},
        "grid": {"N": N},
        "run": {"t": t, "datum": datum, "width": width},
    }, body)


@cli.command("decay-fit")
@click.option("--eps", type=float)
@click.option("--tmax", type=float)
@click.option("--points", "times", type=int, help="Number of dyadic sample times.")
@click.option("--theta-sweep", type=int, help="Number of equispaced phases.")
@click.option("--datum", type=click.Choice(["delta", "gaussian"]))
@click.pass_context
def decay_fit(ctx, eps, tmax, times, theta_sweep, datum):
    """Sup-norm decay exponent of e^{-itH}φ over one or more phases."""

    def body(cfg: RunConfig) -> StageResult:
        freq = build_frequency(cfg)
        V = build_potential(cfg.potential, freq.d)
        t_grid = dyadic_times(cfg.run.t_min, cfg.run.tmax, cfg.run.times)
        phi = build_datum(cfg, 2)
        phases = [cfg.grid.theta + 2.0 * math.pi * i / cfg.grid.theta_sweep
                  for i in range(cfg.grid.theta_sweep)]

        profiles = parallel_map(
            lambda th: decay_profile(phi, t_grid, V, build_theta(th, freq.d), freq), phases
        )

        frames = []
        for th, profile in zip(phases, profiles):
            frames.append(pd.DataFrame({
                "theta": th, "t": profile.times, "sup_norm": profile.sup_norms,
                "l2_norm": profile.l2_norms,
            }))
        slopes = [p.slope for p in profiles]
        summary = {
            "slope": slopes[0],
            "band": list(profiles[0].band),
            "slopes": slopes,
            "thetas": phases,
            "boundary_reached": any(p.boundary_reached for p in profiles),
            "N": profiles[0].N,
        }
        drift = max(p.unitarity_drift for p in profiles)
        return StageResult({"decay-fit": pd.concat(frames, ignore_index=True)}, summary,
                           {"unitarity_drift": drift})

    run_stage(ctx, "decay-fit", {
        "potential": {"eps": eps},
        "grid": {"theta_sweep": theta_sweep},
        "run": {"tmax": tmax, "times": times, "datum": datum},
    }, body)


@cli.command()
@click.option("--p", "p", type=int)
@click.option("--zeta", type=float)
@click.option("--delta0", type=float)
@click.option("--tmax", type=float)
@click.option("--dt", type=float)
@click.option("--eps", type=float)
@click.option("--sign", type=click.Choice(["1", "-1"]))
@click.pass_context
def nls(ctx, p, zeta, delta0, tmax, dt, eps, sign):
    """Small-data DNLS run and its decay bootstrap verdict."""

    def body(cfg: RunConfig) -> StageResult:
        freq = build_frequency(cfg)
        V = build_potential(cfg.potential, freq.d)
        theta = build_theta(cfg.grid.theta, freq.d)
        shape = build_datum(cfg, 2)

        run = bootstrap_run(shape, V, theta, freq, p=cfg.run.p, zeta=cfg.run.zeta,
                            sign=cfg.run.sign, t_final=cfg.run.tmax, dt=cfg.run.dt,
                            delta0=cfg.run.delta0)
        passes, margin = bootstrap_check(run)
        traj = run.trajectory

        frame = pd.DataFrame({"t": traj.times, "sup_norm": traj.sup_norms,
                              "l2_norm": traj.l2_norms, "weighted_sup": run.weighted_sup})
        summary = {
            "p": run.p, "zeta": run.zeta, "sign": run.sign,
            "K1": run.K1, "C1": run.C1, "delta_star": run.delta_star, "delta0": run.delta0,
            "bootstrap_passes": passes, "margin": margin,
            "window_flag": run.window_flag,
            "chain_ok": bool(traj.chain_ok.all()),
            "l2_drift": traj.l2_drift,
        }
        measurements = {"l2_drift": traj.l2_drift, "bootstrap_margin": margin}
        return StageResult({"nls": frame}, summary, measurements)

    run_stage(ctx, "nls", {
        "potential": {"eps": eps},
        "run": {"p": p, "zeta": zeta, "delta0": delta0, "tmax": tmax, "dt": dt,
                "sign": int(sign) if sign is not None else None},
    }, body)


def main():
    cli(prog_name="qpdl")


if __name__ == "__main__":
    main()
