"""Command-line entry point ``gsqg-vstates``.

Configuration is a UTF-8 ``key = value`` file with dotted keys and ``#``
comments, for example ``params.alpha = 1.5``. Values are Python literals;
anything that is not a literal is kept as a bare string.
"""

from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import dynamics, solver
from .contour import write_boundary_csv
from .equilibria import ConfigParams, nondegeneracy_report, point_vortex_residual, solve_equilibrium
from .errors import (
    ConfigurationError,
    DegeneracyError,
    GsqgError,
    MissingPrerequisiteError,
    SolverError,
    VerificationError,
)
from .solver import SolveOptions

PARAM_KEYS = {f.name for f in dataclasses.fields(ConfigParams)}
SOLVE_KEYS = {f.name for f in dataclasses.fields(SolveOptions)}
SOLVE_EXTRA = {"eps_max", "targets", "boundary_nodes"}
DYNAMICS_DEFAULTS: dict[str, Any] = {
    "t_fraction_of_period": 0.1,
    "dt": 5e-4,
    "nodes": 32,
    "snapshot_every": 0,
    "omega_override": None,
}
SWEEP_DEFAULTS: dict[str, Any] = {"axis": None, "grid": None, "solve": False}
VERIFY_RTOL = 1e-3


@dataclass(frozen=True)
class RunConfig:
    params: ConfigParams
    solve: SolveOptions
    eps_max: float
    targets: tuple[float, ...] | None
    boundary_nodes: int
    dynamics: dict[str, Any] = field(default_factory=dict)
    sweep: dict[str, Any] = field(default_factory=dict)
    output_dir: Path = Path("out")


def _parse_value(raw: str) -> Any:
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines into a flat dict keyed by dotted names."""
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not key or not raw:
            raise ConfigurationError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(raw)
    return out


def build_run_config(flat: dict[str, Any]) -> RunConfig:
    """Validate a parsed config; unknown keys are rejected."""
    sections: dict[str, dict[str, Any]] = {"params": {}, "solve": {}, "dynamics": {}, "sweep": {}}
    output_dir = Path("out")
    for key, value in flat.items():
        if key == "output_dir":
            output_dir = Path(str(value))
            continue
        section, _, name = key.partition(".")
        allowed = {
            "params": PARAM_KEYS,
            "solve": SOLVE_KEYS | SOLVE_EXTRA,
            "dynamics": set(DYNAMICS_DEFAULTS),
            "sweep": set(SWEEP_DEFAULTS),
        }.get(section)
        if allowed is None or name not in allowed:
            raise ConfigurationError(f"unknown config key {key!r}")
        sections[section][name] = value
    try:
        params = ConfigParams(**sections["params"])
    except TypeError as exc:
        raise ConfigurationError(f"incomplete params section: {exc}") from exc
    solve_section = dict(sections["solve"])
    eps_max = float(solve_section.pop("eps_max", 0.2 * params.d1 / max(params.b)))
    targets = solve_section.pop("targets", None)
    if targets is not None:
        if not isinstance(targets, list | tuple):
            raise ConfigurationError("solve.targets must be a list")
        targets = tuple(float(t) for t in targets)
    boundary_nodes = int(solve_section.pop("boundary_nodes", 256))
    try:
        opts = SolveOptions(**solve_section)
    except TypeError as exc:
        raise ConfigurationError(f"bad solve section: {exc}") from exc
    dyn = {**DYNAMICS_DEFAULTS, **sections["dynamics"]}
    if not (dyn["t_fraction_of_period"] > 0 and dyn["dt"] > 0 and int(dyn["nodes"]) >= 8):
        raise ConfigurationError("dynamics needs t_fraction_of_period > 0, dt > 0 and nodes >= 8")
    sweep = {**SWEEP_DEFAULTS, **sections["sweep"]}
    return RunConfig(
        params=params,
        solve=opts,
        eps_max=eps_max,
        targets=targets,
        boundary_nodes=boundary_nodes,
        dynamics=dyn,
        sweep=sweep,
        output_dir=output_dir,
    )


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return build_run_config(parse_config_text(p.read_text(encoding="utf-8")))


def _write_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(solver._json_safe(doc), indent=2) + "\n", encoding="utf-8")


def _eps_tag(eps: float) -> str:
    return format(eps, ".10g")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_equilibrium(cfg: RunConfig, out: Path) -> int:
    params = cfg.params
    try:
        eq = solve_equilibrium(params)
    except DegeneracyError as exc:
        raise DegeneracyError(f"Jacobian determinant vanishes: {exc}") from exc
    report = nondegeneracy_report(params, eq)
    residuals = point_vortex_residual(eq.lam, params)
    _write_json(
        out / "equilibrium.json",
        {
            "omega_star": eq.omega_star,
            "gamma2_star": eq.gamma2_star,
            "s_alpha": eq.s_alpha,
            "t_plus": eq.t_plus,
            "t_minus": eq.t_minus,
            "det": eq.det_jacobian,
            "nondeg_lhs": eq.nondeg_lhs,
            "residuals": list(residuals),
        },
    )
    if not report.nondeg_nonzero:
        raise DegeneracyError(f"non-degeneracy condition fails: nondeg_lhs = {report.nondeg_lhs:.6g}")
    if not report.det_nonzero:
        raise DegeneracyError(f"Jacobian determinant vanishes: det = {report.det:.6g}")
    _log(f"Omega* = {eq.omega_star:.15g}, gamma2* = {eq.gamma2_star:.15g}")
    return 0


def _targets(cfg: RunConfig, eps_max: float | None, steps: int | None) -> list[float]:
    if cfg.targets is not None and eps_max is None and steps is None:
        return list(cfg.targets)
    return solver.geometric_ladder(
        eps_max if eps_max is not None else cfg.eps_max,
        steps if steps is not None else cfg.solve.continuation_steps,
    )


def cmd_solve(cfg: RunConfig, out: Path, eps_max: float | None = None, steps: int | None = None) -> int:
    params, opts = cfg.params, cfg.solve
    targets = _targets(cfg, eps_max, steps)
    vdir = out / "vstates"
    vdir.mkdir(parents=True, exist_ok=True)
    result = solver.continuation(targets, params, opts)
    records = []
    for state, res in zip(result.states, result.results):
        tag = _eps_tag(state.epsilon)
        solver.write_vstate_json(vdir / f"eps_{tag}.json", state, params)
        if state.epsilon != 0.0:
            write_boundary_csv(out / f"boundary_eps_{tag}.csv", state, params, cfg.boundary_nodes)
        records.append(
            {
                "epsilon": state.epsilon,
                "iterations": res.iterations,
                "residual": res.residual,
                "omega": state.omega,
                "gamma2": state.gamma2,
            }
        )
    _write_json(
        out / "solve.json",
        {"tol": opts.tol, "states": records, "failed_target": result.failed_target, "failure": result.failure},
    )
    if result.states:
        _write_json(out / "convexity.json", solver.convexity_sweep(result.states, params))
    nonzero = [s for s in result.states if s.epsilon != 0.0]
    if len(nonzero) >= 3:
        _write_json(out / "asymptotics.json", solver.asymptotic_report(nonzero, params).to_dict())
    if not result.ok:
        raise SolverError(f"continuation failed at eps = {result.failed_target}: {result.failure}")
    _log(f"solved {len(result.states)} state(s); max residual {max(r['residual'] for r in records):.3g}")
    return 0


def _load_states(out: Path) -> list:
    vdir = out / "vstates"
    files = sorted(vdir.glob("eps_*.json")) if vdir.is_dir() else []
    states = [solver.read_vstate_json(f) for f in files]
    states = [s for s in states if s.epsilon != 0.0]
    if not states:
        raise MissingPrerequisiteError(f"no solved states with eps != 0 in {vdir}: run solve first")
    return states


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    params, dyn = cfg.params, cfg.dynamics
    state = max(_load_states(out), key=lambda s: abs(s.epsilon))
    ensemble = dynamics.ensemble_from_vstate(state, params, int(dyn["nodes"]))
    period = 2.0 * math.pi / abs(state.omega)
    t_final = float(dyn["t_fraction_of_period"]) * period
    run = dynamics.evolve(
        ensemble, params.alpha, t_final, float(dyn["dt"]), snapshot_every=int(dyn["snapshot_every"])
    )
    omega_fit, deviation = dynamics.rotation_fit(ensemble, run.final, t_final)
    omega_claim = float(dyn["omega_override"]) if dyn["omega_override"] is not None else state.omega
    rel_error = abs(omega_fit - omega_claim) / abs(omega_claim)
    area_drift = run.area_drift()
    _write_json(
        out / "rotation.json",
        {
            "epsilon": state.epsilon,
            "omega_fit": omega_fit,
            "omega_solver": omega_claim,
            "rel_error": rel_error,
            "deviation": deviation,
            "area_drift": area_drift,
        },
    )
    dynamics.write_summary_json(out / "dynamics_summary.json", omega_fit, deviation, area_drift)
    snaps = run.snapshots or [(0.0, ensemble)]
    if snaps[-1][0] != t_final:
        snaps = snaps + [(t_final, run.final)]
    dynamics.write_trajectory_csv(out / "trajectory.csv", snaps)
    if rel_error > VERIFY_RTOL:
        raise VerificationError(
            f"rotation rate mismatch: fitted {omega_fit:.10g} vs claimed {omega_claim:.10g} "
            f"(relative error {rel_error:.3g} > {VERIFY_RTOL:g})"
        )
    _log(f"omega_fit = {omega_fit:.10g}, relative error {rel_error:.3g}, deviation {deviation:.3g}")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path, eps_max: float | None = None) -> int:
    axis, grid = cfg.sweep["axis"], cfg.sweep["grid"]
    if axis not in PARAM_KEYS:
        raise ConfigurationError(f"sweep.axis must be one of {sorted(PARAM_KEYS)}, got {axis!r}")
    if not isinstance(grid, list | tuple) or not grid:
        raise ConfigurationError("sweep.grid must be a non-empty list")
    header = ["value", "omega_star", "gamma2_star", "det", "nondeg_lhs", "det_ok", "nondeg_ok", "status"]
    if cfg.sweep["solve"]:
        header += ["eps", "iterations", "residual"]
    rows = []
    for value in grid:
        row: dict[str, Any] = {"value": value}
        try:
            params = dataclasses.replace(cfg.params, **{axis: value})
            eq = solve_equilibrium(params)
            rep = nondegeneracy_report(params, eq)
            row.update(
                omega_star=eq.omega_star,
                gamma2_star=eq.gamma2_star,
                det=eq.det_jacobian,
                nondeg_lhs=eq.nondeg_lhs,
                det_ok=rep.det_nonzero,
                nondeg_ok=rep.nondeg_nonzero,
                status="ok" if rep.ok else "degenerate",
            )
            if cfg.sweep["solve"] and rep.ok:
                eps = eps_max if eps_max is not None else cfg.eps_max
                res = solver.newton_solve(eps, params, cfg.solve)
                row.update(eps=eps, iterations=res.iterations, residual=res.residual)
        except DegeneracyError as exc:
            row.update(det=0.0, det_ok=False, status=f"degenerate: {exc}")
        except GsqgError as exc:
            row.update(status=f"error: {exc}")
        rows.append(row)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(row.get(h, "")) for h in header])
    _log(f"swept {axis} over {len(rows)} value(s)")
    return 0


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsqg-vstates",
        description="Co-rotating nested polygonal patch equilibria for generalized SQG.",
    )
    parser.add_argument("command", choices=["equilibrium", "solve", "verify", "sweep"])
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--eps-max", type=float, help="largest eps of the continuation ladder")
    parser.add_argument("--steps", type=int, help="number of ladder steps")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        solver.worker_count()
        out = Path(args.out) if args.out else cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "equilibrium":
            return cmd_equilibrium(cfg, out)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.eps_max, args.steps)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        return cmd_sweep(cfg, out, args.eps_max)
    except GsqgError as exc:
        _log(f"error: {exc}")
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
