"""
Command-line surface of the Bergman density laboratory.

    python cli.py density     --m 2 --m 8
    python cli.py fit         --potential 2 0.02
    python cli.py obstruction --lift sl --m 4 --m 8 --m 16
    python cli.py correct     --inject 1 2 0.1 --steps 1
    python cli.py check

Every run writes its CSV files plus <command>_manifest.json into --out.
Exit status: 0 success, 1 error, 2 a checked invariant failed.
"""
import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from pathlib import Path

import numpy as np

from config import DEFAULT_CONFIG, build_run_config, convert_value, get_effective_config, load_config
from errors import ConfigError, LabError
from worker import EXIT_ERROR, process_run

LAB_VERSION = "1.0.0"
MANIFEST_SCHEMA = 1

logger = logging.getLogger("cli")

DEFAULT_POWERS = {
    "density": (2, 8, 32),
    "fit": (16, 24, 32, 48, 64),
    "obstruction": (4, 8, 16),
    "correct": (16, 24, 32, 48, 64),
    "check": (16, 24, 32, 48, 64),
}

COMMAND_HELP = {
    "density": "Gram entries and Bergman density K(q, h) at each power.",
    "fit": "Fit the large-m expansion and compare a1 with half the scalar curvature.",
    "obstruction": "Obstruction character for the configured lift, with the pullback identity.",
    "correct": "Run corrector steps from the configured start and record the decay order.",
    "check": "Run the invariant suite.",
}

# Fixed metrics used by the invariant suite
A1_POTENTIALS = (((2, 0.02),), ((3, 0.005),))
A1_MEAN_TOL = 1e-2
IDENTITY_POWERS = (2, 8, 32)
CHARACTER_POWERS = (4, 8, 16)
SPECTRUM_MAX_K = 16


@dataclass
class CheckOutcome:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class CommandResult:
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    passed: bool = None


# --- Output helpers ---

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating, Fraction)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (Fraction, Path)):
        return str(obj)
    return obj


def local_time_str(dt):
    """Render an aware UTC datetime in the TZ of the host."""
    import pytz
    try:
        local_tz = pytz.timezone(os.environ.get("TZ", "UTC"))
    except Exception:
        local_tz = pytz.utc
    return dt.astimezone(local_tz).strftime("%Y-%m-%d %H:%M:%S %Z")


def write_manifest(out_dir, outcome, config_echo):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = outcome.result
    files = []
    if result is not None:
        for path in result.files:
            path = Path(path)
            files.append({
                "path": path.relative_to(out_dir).as_posix() if path.is_relative_to(out_dir) else str(path),
                "sha256": sha256_file(path),
                "bytes": path.stat().st_size,
            })
    manifest = {
        "schema_version": MANIFEST_SCHEMA,
        "lab_version": LAB_VERSION,
        "command": outcome.command,
        "status": outcome.status,
        "exit_code": outcome.exit_code,
        "passed": None if result is None else result.passed,
        "config": config_echo,
        "summary": {} if result is None else result.summary,
        "flags": {} if result is None else result.flags,
        "checks": [] if result is None else [
            {"name": c.name, "value": c.value, "tolerance": c.tolerance, "passed": c.passed, "detail": c.detail}
            for c in result.checks
        ],
        "files": files,
        "error": outcome.error,
        "timestamps": {
            "started_at": outcome.started_at.isoformat(),
            "finished_at": outcome.finished_at.isoformat() if outcome.finished_at else None,
            "local_time": local_time_str(outcome.finished_at or outcome.started_at),
        },
    }
    path = out_dir / f"{outcome.command}_manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(manifest), f, indent=4, sort_keys=True)
        f.write("\n")
    return path


# --- Commands ---

def cmd_density(cfg):
    from bergman import c_q, density, gram
    from geom import integrate

    g = cfg.metric()
    density_rows, gram_rows = [], []
    powers = {}
    for m in cfg.m_list:
        sg = gram(m, g)
        profile = density(m, g, sg)
        cq = float(c_q(m))
        density_rows += [(m, x, k, cq, k - cq) for x, k in zip(g.grid.nodes, profile.values)]
        gram_rows += [(m, i, v) for i, v in enumerate(sg.values)]
        powers[str(m)] = {
            "c_q": str(c_q(m)),
            "sup_deviation": profile.sup_deviation(),
            "mean_defect": abs(integrate(profile.values, g) - cq),
        }
        logger.info(f"m={m}: sup|K - C_q| = {powers[str(m)]['sup_deviation']:.3e}")

    mean_defect = max(p["mean_defect"] for p in powers.values())
    files = [
        write_csv(cfg.out_dir / "density.csv", ["m", "x", "K", "C_q", "K_minus_Cq"], density_rows),
        write_csv(cfg.out_dir / "gram.csv", ["m", "index", "value"], gram_rows),
    ]
    ok = mean_defect <= cfg.tol("tol_exact")
    return CommandResult(
        files=files,
        summary={"nodes": g.grid.node_count, "powers": powers, "mean_defect": mean_defect},
        flags={"mean_identity": ok},
        passed=ok,
    )


def cmd_fit(cfg):
    from expansion import expansion_rows, fit_expansion, verify_a1
    from geom import integrate

    g = cfg.metric()
    fit = fit_expansion(
        g, cfg.m_list, order=cfg.fit_order, max_condition=cfg.tol("max_condition"),
        residual_tol=cfg.tol("tol_fit_residual"), workers=cfg.workers,
    )
    discrepancy = verify_a1(g, cfg.m_list, fit=fit)
    a1_mean = integrate(fit.a1, g)
    logger.info(f"sup|a1 - sigma/2| = {discrepancy:.3e}, mean a1 = {a1_mean:.6f}")

    files = [write_csv(
        cfg.out_dir / "expansion.csv",
        ["x", "a1", "a2", "a3", "sigma_half", "abs_error"],
        expansion_rows(fit, g),
    )]
    flags = {
        "reliable": fit.reliable,
        "a1_matches_half_scalar_curvature": discrepancy <= cfg.tol("tol_a1"),
        "a1_mean_is_one": abs(a1_mean - 1.0) <= A1_MEAN_TOL,
    }
    return CommandResult(
        files=files,
        summary={
            "m_list": list(fit.m_list),
            "order": fit.order,
            "a1_discrepancy": discrepancy,
            "a1_mean": a1_mean,
            "residual_norm": fit.residual_norm,
            "leading_error": fit.leading_error,
            "condition": fit.condition,
        },
        flags=flags,
        passed=all(flags.values()),
    )


def cmd_obstruction(cfg):
    from equivariant import character_check, lift_stability_check, obstruction_rows

    g = cfg.metric()
    lift = cfg.lift_for(cfg.m_list)
    rows = obstruction_rows(lift, cfg.m_list, g, degree=cfg.degree)
    report = character_check(lift, cfg.m_list, g, tol=cfg.tol("tol_identity")) if cfg.check_character else None
    stability = lift_stability_check(lift, cfg.m_list)

    files = [write_csv(
        cfg.out_dir / "obstruction.csv",
        ["m", "lift_constant", "chi", "obstruction", "identity_defect", "abs_character"],
        rows,
    )]
    identity_defect = max(r[4] for r in rows)
    flags = {
        "pullback_identity": identity_defect <= cfg.tol("tol_identity"),
        "lift_stable": stability.stable,
    }
    summary = {
        "lift": lift.describe(),
        "chi": {str(r[0]): r[2] for r in rows},
        "obstruction": {str(r[0]): r[3] for r in rows},
        "pullback_identity_defect": identity_defect,
        "lift_k0": stability.k0,
    }
    passed = flags["pullback_identity"]
    if report is not None:
        flags["m_independent"] = report.m_independent
        flags["vanishing"] = report.vanishing
        summary["character_spread"] = report.max_deviation
        summary["reason"] = report.reason
        passed = passed and report.passed
    return CommandResult(files=files, summary=summary, flags=flags, passed=passed)


def cmd_correct(cfg):
    from corrector import ApproxState, deviation_coefficient, dump_state, step, verify_order

    ms = cfg.m_list
    g = cfg.metric(ms)
    if g.potential.pairs():
        logger.warning("Starting metric is not Fubini-Study; the deviation need not start at order q^2")
    state = ApproxState.from_base(g, cfg.injections())
    extract = dict(guard_orders=cfg.guard_orders, degree=cfg.degree,
                   max_condition=cfg.tol("max_condition"), workers=cfg.workers)

    trace, levels = [], []
    for level in range(cfg.steps + 1):
        order = verify_order(state, ms, floor=cfg.tol("tol_exact"), slack=cfg.tol("tol_slope"), workers=cfg.workers)
        entry = {
            "level": level,
            "slope": None if order.exact else order.slope,
            "exact": order.exact,
            "passed": order.passed,
            "max_deviation": max(order.deviations),
        }
        if level < cfg.steps:
            report = step(
                state, ms, d0_scale=cfg.d0_scale, refine_sweeps=cfg.refine_sweeps,
                refine_tol=cfg.refine_tol, kernel_tol=cfg.tol("tol_kernel"), **extract,
            )
            v_residual = abs(report.deviation.v)
            entry.update(sweeps=report.sweeps, refine_residual=report.refine_residual)
            psi = state.injected_at(level + 1)
            if psi.pairs():
                entry["recovery"] = (report.phi_first + psi).sup_norm() / psi.sup_norm()
        else:
            v_residual = abs(deviation_coefficient(state, ms, **extract).v)
        entry["v_residual"] = v_residual
        slope = "exact" if order.exact else order.slope
        trace += [(level, m, d, slope, v_residual) for m, d in zip(ms, order.deviations)]
        levels.append(entry)
        logger.info(
            f"Level {level}: max|K - C_q| = {entry['max_deviation']:.3e}, "
            f"slope = {slope if order.exact else f'{order.slope:.3f}'}"
        )
        if level < cfg.steps:
            state = report.state

    files = [write_csv(cfg.out_dir / "trace.csv", ["level", "m", "sup_deviation", "slope", "v_residual"], trace)]
    state_path = cfg.out_dir / "state.txt"
    state_path.write_text(dump_state(state), encoding="utf-8")
    files.append(state_path)

    flags = {"order": levels[-1]["passed"]}
    recoveries = [e["recovery"] for e in levels if "recovery" in e]
    if recoveries:
        flags["recovery"] = max(recoveries) <= cfg.tol("tol_recovery")
    return CommandResult(
        files=files,
        summary={"m_list": list(ms), "levels": levels, "final_level": state.level},
        flags=flags,
        passed=all(flags.values()),
    )


# --- Invariant suite ---

def _grid_for(cfg, m_max):
    from geom import grid_size, moment_grid
    return moment_grid(grid_size(m_max, cfg.nodes))


def _random_potentials(cfg):
    from geom import random_potential
    rng = np.random.default_rng(cfg.seed)
    return [random_potential(rng) for _ in range(cfg.random_potentials)]


def _check(name, value, tolerance, passed=None, detail=""):
    value = float(value)
    if passed is None:
        passed = value <= tolerance
    return CheckOutcome(name=name, value=value, tolerance=float(tolerance), passed=bool(passed), detail=detail)


def check_fs_balance(cfg):
    from bergman import balance_defect
    from geom import InvariantMetric
    g = InvariantMetric.fubini_study(_grid_for(cfg, max(IDENTITY_POWERS)))
    value = max(balance_defect(m, g) for m in (1,) + IDENTITY_POWERS)
    return [_check("fs_balance", value, cfg.tol("tol_exact"))]


def check_gram_oracle(cfg):
    from bergman import gram
    from geom import InvariantMetric
    g = InvariantMetric.fubini_study(_grid_for(cfg, 8))
    worst = 0.0
    for m in (1, 2, 5, 8):
        exact = np.array([1.0 / ((m + 1) * comb(m, i)) for i in range(m + 1)])
        worst = max(worst, float(np.max(np.abs(gram(m, g).values - exact))))
    return [_check("gram_oracle", worst, cfg.tol("tol_exact"))]


def check_quadrature_identities(cfg):
    from bergman import c_q, density
    from geom import InvariantMetric, integrate, moment_map, scalar_curvature
    grid = _grid_for(cfg, 32)
    mean_defect = barycenter = gauss_bonnet = 0.0
    for potential in _random_potentials(cfg):
        g = InvariantMetric(potential, grid)
        for m in (8, 32):
            mean_defect = max(mean_defect, abs(integrate(density(m, g).values, g) - float(c_q(m))))
        barycenter = max(barycenter, abs(integrate(moment_map(g), g) - 0.5))
        gauss_bonnet = max(gauss_bonnet, abs(integrate(scalar_curvature(g), g) - 2.0), abs(g.volume() - 1.0))
    tol = cfg.tol("tol_exact")
    return [
        _check("mean_identity", mean_defect, tol),
        _check("dh_barycenter", barycenter, tol),
        _check("gauss_bonnet", gauss_bonnet, tol),
    ]


def check_a1(cfg):
    from expansion import fit_expansion, verify_a1
    from geom import InvariantFunction, InvariantMetric
    ms = cfg.m_list
    grid = _grid_for(cfg, max(ms))
    worst = 0.0
    consistent = True
    detail = []
    for pairs in A1_POTENTIALS:
        g = InvariantMetric(InvariantFunction.from_pairs(pairs), grid)
        fit = fit_expansion(g, ms, max_condition=cfg.tol("max_condition"), workers=cfg.workers)
        full = verify_a1(g, ms, fit=fit)
        worst = max(worst, full)
        if len(ms) > 3:
            capped = verify_a1(g, ms[:3], max_condition=cfg.tol("max_condition"))
            consistent = consistent and full < capped
            detail.append(f"P{pairs[0][0]}: full {full:.2e}, first three powers {capped:.2e}")
    return [
        _check("a1_half_scalar_curvature", worst, cfg.tol("tol_a1")),
        _check("a1_refinement", worst, cfg.tol("tol_a1"), passed=consistent, detail="; ".join(detail)),
    ]


def check_spectrum(cfg):
    from geom import InvariantFunction, laplace_fs, lichnerowicz_eigenvalue, lichnerowicz_fs
    worst = 0.0
    kernel = []
    for k in range(SPECTRUM_MAX_K + 1):
        image = lichnerowicz_fs(InvariantFunction.basis(k), scale=cfg.d0_scale)
        eigen = image.coefficient(k)
        worst = max(worst, abs(eigen - lichnerowicz_eigenvalue(k)))
        if k >= 1 and eigen == 0.0:
            kernel.append(k)
    # D₀ must agree with Δ₀² + 2Δ₀ and annihilate the holomorphy potential x − 1/2
    f = InvariantFunction(np.arange(1.0, SPECTRUM_MAX_K + 2.0) ** -2)
    lap = laplace_fs(f)
    composed = laplace_fs(lap) + 2.0 * lap
    worst = max(worst, float(np.max(np.abs((lichnerowicz_fs(f, cfg.d0_scale) - composed).coeffs))))
    holomorphy = lichnerowicz_fs(InvariantFunction([0.0, 0.5]), cfg.d0_scale).sup_norm()
    return [
        _check("lichnerowicz_spectrum", worst, cfg.tol("tol_exact")),
        _check("lichnerowicz_kernel", holomorphy, cfg.tol("tol_exact"), passed=kernel == [1] and holomorphy == 0.0,
               detail=f"kernel indices {kernel}"),
    ]


def check_self_adjoint(cfg):
    from geom import InvariantFunction, InvariantMetric, integrate, lichnerowicz_fs
    g = InvariantMetric.fubini_study(_grid_for(cfg, 8))
    rng = np.random.default_rng(cfg.seed + 1)
    f = InvariantFunction(rng.standard_normal(9))
    h = InvariantFunction(rng.standard_normal(9))
    x = g.grid.nodes
    left = integrate(lichnerowicz_fs(f)(x) * h(x), g)
    right = integrate(f(x) * lichnerowicz_fs(h)(x), g)
    value = abs(left - right) / max(1.0, abs(left))
    return [_check("self_adjoint", value, cfg.tol("tol_exact"))]


def check_linearization(cfg):
    from corrector import linearization_check
    from geom import InvariantFunction
    ms = cfg.m_list
    grid = _grid_for(cfg, max(ms))
    results = []
    for k in (2, 3):
        report = linearization_check(
            InvariantFunction.basis(k), 1, ms, grid, amplitude=cfg.linearization_amplitude,
            d0_scale=cfg.d0_scale, guard_orders=cfg.guard_orders, max_condition=cfg.tol("max_condition"),
            workers=cfg.workers,
        )
        results.append(_check(f"linearization_p{k}", report.relative_error, cfg.tol("tol_linearization")))
    zero = linearization_check(InvariantFunction.zero(2), 1, ms, grid, d0_scale=cfg.d0_scale)
    results.append(_check("linearization_zero", zero.sup_error, cfg.tol("tol_exact")))
    return results


def check_corrector(cfg):
    from corrector import ApproxState, realize, step, verify_order
    from equivariant import Lift, max_character
    from geom import InvariantFunction, InvariantMetric
    ms = cfg.m_list
    grid = _grid_for(cfg, max(ms))
    psi = InvariantFunction.basis(2, 0.1)
    state = ApproxState.from_base(InvariantMetric.fubini_study(grid), [(1, psi)])

    before = verify_order(state, ms, floor=cfg.tol("tol_exact"), slack=cfg.tol("tol_slope"))
    report = step(state, ms, d0_scale=cfg.d0_scale, guard_orders=cfg.guard_orders,
                  refine_sweeps=cfg.refine_sweeps, refine_tol=cfg.refine_tol,
                  kernel_tol=cfg.tol("tol_kernel"), degree=cfg.degree, max_condition=cfg.tol("max_condition"),
                  workers=cfg.workers)
    after = verify_order(report.state, ms, floor=cfg.tol("tol_exact"), slack=cfg.tol("tol_slope"))
    recovery = (report.phi_first + psi).sup_norm() / psi.sup_norm()
    orthogonality = max_character(lambda m: realize(report.state, m), Lift.sl(), ms)
    return [
        _check("corrector_start_order", before.slope, before.expected - cfg.tol("tol_slope"),
               passed=before.passed, detail=f"slope {before.slope:.3f}"),
        _check("corrector_recovery", recovery, cfg.tol("tol_recovery")),
        _check("corrector_order", 0.0 if after.exact else after.slope, after.expected - cfg.tol("tol_slope"),
               passed=after.passed, detail="exact" if after.exact else f"slope {after.slope:.3f}"),
        _check("corrector_orthogonality", orthogonality, cfg.tol("tol_identity")),
    ]


def check_obstruction(cfg):
    from equivariant import Lift, character_check, chi, obstruction
    from geom import InvariantFunction, InvariantMetric
    grid = _grid_for(cfg, max(CHARACTER_POWERS))
    fs = InvariantMetric.fubini_study(grid)
    bent = InvariantMetric(InvariantFunction.basis(2, 0.1), grid)
    zero_lift = Lift.constant(0)
    tol = cfg.tol("tol_identity")

    metric_independence = abs(chi(zero_lift, 8, fs) - chi(zero_lift, 8, bent))
    spread = character_check(zero_lift, CHARACTER_POWERS, bent, tol=tol).max_deviation
    affinity = abs(chi(Lift.constant("1/3"), 8, bent) - chi(zero_lift, 8, bent) - 2.0 / 3.0)
    vanishing = max(abs(obstruction(Lift.sl(), m, bent)) for m in CHARACTER_POWERS)
    return [
        _check("character_metric_independence", metric_independence, tol),
        _check("character_m_independence", spread, tol),
        _check("character_affinity", affinity, cfg.tol("tol_exact")),
        _check("sl_obstruction_vanishes", vanishing, tol),
    ]


def check_pullback(cfg):
    from bergman import fs_pullback
    from equivariant import pullback_identity_defect
    from geom import InvariantFunction, InvariantMetric
    grid = _grid_for(cfg, max(IDENTITY_POWERS))
    fs = InvariantMetric.fubini_study(grid)
    bent = InvariantMetric(InvariantFunction.basis(2, 0.1), grid)
    identity = max(pullback_identity_defect(m, g, degree=cfg.degree) for m in IDENTITY_POWERS for g in (fs, bent))
    fixed_point = max(fs_pullback(m, fs, cfg.degree).potential.sup_norm() for m in IDENTITY_POWERS)
    distances = [(fs_pullback(m, bent, cfg.degree).potential - bent.potential).sup_norm() for m in (8, 32)]
    return [
        _check("pullback_identity", identity, cfg.tol("tol_identity")),
        _check("fs_fixed_point", fixed_point, cfg.tol("tol_exact")),
        _check("pullback_convergence", distances[1] / distances[0], 1.0,
               passed=distances[1] < distances[0], detail=f"m=8: {distances[0]:.3e}, m=32: {distances[1]:.3e}"),
    ]


CHECKS = (
    check_fs_balance,
    check_gram_oracle,
    check_quadrature_identities,
    check_a1,
    check_spectrum,
    check_self_adjoint,
    check_linearization,
    check_corrector,
    check_obstruction,
    check_pullback,
)


def cmd_check(cfg):
    outcomes = []
    for check in CHECKS:
        try:
            outcomes += check(cfg)
        except LabError as e:
            logger.error(f"{check.__name__} raised {type(e).__name__}: {e}")
            outcomes.append(CheckOutcome(name=check.__name__, value=float("nan"), tolerance=float("nan"),
                                         passed=False, detail=f"{type(e).__name__}: {e}"))
    for c in outcomes:
        level = logging.INFO if c.passed else logging.WARNING
        logger.log(level, f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value:.3e} (tol {c.tolerance:.1e}) {c.detail}")

    files = [write_csv(
        cfg.out_dir / "check.csv",
        ["name", "value", "tolerance", "passed", "detail"],
        [(c.name, c.value, c.tolerance, c.passed, c.detail) for c in outcomes],
    )]
    failed = [c.name for c in outcomes if not c.passed]
    return CommandResult(
        files=files,
        summary={"total": len(outcomes), "failed": failed},
        flags={c.name: c.passed for c in outcomes},
        checks=outcomes,
        passed=not failed,
    )


COMMANDS = {
    "density": cmd_density,
    "fit": cmd_fit,
    "obstruction": cmd_obstruction,
    "correct": cmd_correct,
    "check": cmd_check,
}


# --- Entry point ---

class LabArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = LabArgumentParser(prog="bergman-lab", description="Bergman density laboratory on (P1, O(1)).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {LAB_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMAND_HELP.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, help="Key-value config file.")
        sub.add_argument("--out", help="Output directory (default: results).")
        sub.add_argument("--m", type=int, action="append", help="Power; repeat for a list.")
        sub.add_argument("--nodes", type=int, help="Quadrature node count (0 derives it from the largest power).")
        sub.add_argument("--degree", type=int, help="Legendre degree cap for projected profiles (default 64).")
        sub.add_argument("--lift", action="append", help="Lift constant (rational or 'sl'); repeat for one per power.")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--potential", nargs=2, action="append", metavar=("K", "VALUE"))
        sub.add_argument("--inject", nargs=3, action="append", metavar=("ORDER", "K", "VALUE"))
        sub.add_argument("--steps", type=int)
        sub.add_argument("--d0-scale", type=float, dest="d0_scale")
        sub.add_argument("--workers", type=int)
        sub.add_argument("--db-path", dest="db_path", help="Run ledger path, or 'none'.")
        noise = sub.add_mutually_exclusive_group()
        noise.add_argument("-v", "--verbose", action="store_true")
        noise.add_argument("-q", "--quiet", action="store_true")
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
    logging.getLogger().setLevel(level)


def _overrides(args):
    overrides = {key: getattr(args, key) for key in
                 ("out", "m", "nodes", "degree", "lift", "seed", "steps", "d0_scale", "workers", "db_path")}
    if args.potential:
        overrides["potential"] = [convert_value("potential", " ".join(p)) for p in args.potential]
    if args.inject:
        overrides["inject"] = [convert_value("inject", " ".join(t)) for t in args.inject]
    return overrides


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        logging.error(f"Usage error: {e}")
        return EXIT_ERROR
    configure_logging(args.verbose, args.quiet)

    file_config = None
    try:
        file_config = load_config(args.config)
        effective = get_effective_config(file_config, _overrides(args))
        cfg = build_run_config(effective, default_m=DEFAULT_POWERS[args.command])
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        from worker import RunOutcome
        out_dir = args.out or (file_config or DEFAULT_CONFIG)["out"]
        outcome = RunOutcome(command=args.command, status="error", exit_code=EXIT_ERROR, error=f"ConfigError: {e}")
        outcome.finished_at = outcome.started_at
        try:
            write_manifest(out_dir, outcome, None)
        except OSError as write_error:
            logger.error(f"Could not write run manifest: {write_error}")
        return EXIT_ERROR

    outcome = process_run(
        args.command, COMMANDS[args.command], cfg,
        lambda o: write_manifest(cfg.out_dir, o, cfg.echo()),
    )
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
