"""Scenario runner: verify / simulate / blowup / maclane / classify.

Every command reads its parameters from flags, an optional key=value
config file, and an optional preset (flag > config > preset > default),
validates them up front, and writes all outputs (CSV, JSON, PNG) under
the chosen output directory.  Reports contain no timestamps or absolute
paths, so a fixed seed reproduces them byte for byte.

Presets cover the canonical experiments: `constant` and `traveling` are
exact stationary data, `perturbed` breaks the traveling structure and
develops a gradient blow-up, `elliptic-bump` is stationary data whose
strips cross the elliptic region.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import classify_trajectory
from .errors import (
    BadSpecError,
    BenneyLabError,
    ConfigError,
    NoBlowupPredictedError,
    NotAdmissibleError,
    NewtonDivergedError,
)
from .characteristics import predict_blowup, trace, z_transport
from .evolve import SolverConfig, StopReason, run
from .fields import TorusGrid, read_snapshots_csv, sample_field, write_snapshots_csv
from .polycore import (
    Regime,
    admissible_violations,
    classify_regime,
    maclane_forward,
    maclane_inverse,
)
from .verify import IDENTITY_SPECS, run_identity_suite, sample_hyperbolic_box, write_report

PRESETS = {
    "constant": {
        "initial": "constant: u1=-0.5 u2=0 u3=0",
        "grid": 64, "scheme": "central", "cfl": 0.5, "t_end": 1.0,
        "threshold": 1e3, "snapshot_every": 50,
    },
    "traveling": {
        "initial": "traveling: amplitude=0.1 offset=-0.3 const=0",
        "grid": 256, "scheme": "central", "cfl": 0.5, "t_end": 2.0,
        "threshold": 1e3, "snapshot_every": 100,
    },
    "perturbed": {
        "initial": "perturbed: amplitude=0.1 offset=-0.3 const=0 delta=0.05",
        "grid": 512, "scheme": "riemann", "cfl": 0.65, "t_end": 4.0,
        "threshold": 5.5, "snapshot_every": 25,
    },
    "elliptic-bump": {
        "initial": "elliptic-bump: amplitude=0.2 offset=0 const=0",
        "grid": 256, "scheme": "central", "cfl": 0.3, "t_end": 0.25,
        "threshold": 1e3, "snapshot_every": 60,
    },
}

_DEFAULTS = {
    "grid": 128, "scheme": "central", "cfl": 0.5, "t_end": 1.0,
    "threshold": 1e3, "snapshot_every": 50, "seed": 42, "samples": 1000,
    "initial": "constant: u1=-0.5 u2=0 u3=0",
}

_FIELD_TYPES = {
    "grid": int, "seed": int, "samples": int, "snapshot_every": int,
    "cfl": float, "t_end": float, "threshold": float, "bound": float,
    "tolerance": float, "classify_tol": float,
    "scheme": str, "preset": str, "initial": str, "out": str, "input": str,
    "r": str,
    "band": bool, "no_plots": bool, "simulate": bool, "rk2": bool,
}


@dataclass
class RunConfig:
    """Merged, validated parameters of one command invocation."""

    command: str
    out: Path
    grid: int = 128
    scheme: str = "central"
    cfl: float = 0.5
    t_end: float = 1.0
    threshold: float = 1e3
    snapshot_every: int = 50
    seed: int = 42
    samples: int = 1000
    bound: float | None = None
    tolerance: float | None = None
    classify_tol: float | None = None
    initial: str = _DEFAULTS["initial"]
    preset: str | None = None
    input: str | None = None
    r: str | None = None
    band: bool = False
    no_plots: bool = False
    simulate: bool = False
    rk2: bool = False


def parse_config_file(path: str) -> dict:
    """key = value lines, '#' comments; unknown keys are rejected with the line."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        typ = _FIELD_TYPES[key]
        try:
            if typ is bool:
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError("expected true/false")
                values[key] = value.lower() in ("true", "1")
            else:
                values[key] = typ(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def build_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Merge flag > config file > preset > defaults and validate."""
    file_values = parse_config_file(args.config) if args.config else {}
    preset_name = (
        args.preset if args.preset is not None else file_values.get("preset")
    )
    preset = {}
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset_name!r}; choose from {sorted(PRESETS)}"
            )
        preset = PRESETS[preset_name]

    def pick(name, default):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in file_values:
            return file_values[name]
        if name in preset:
            return preset[name]
        return default

    if getattr(args, "out", None) is None and "out" not in file_values:
        raise ConfigError("missing output directory (--out)")
    cfg = RunConfig(
        command=command,
        out=Path(pick("out", None)),
        grid=pick("grid", _DEFAULTS["grid"]),
        scheme=pick("scheme", _DEFAULTS["scheme"]),
        cfl=pick("cfl", _DEFAULTS["cfl"]),
        t_end=pick("t_end", _DEFAULTS["t_end"]),
        threshold=pick("threshold", _DEFAULTS["threshold"]),
        snapshot_every=pick("snapshot_every", _DEFAULTS["snapshot_every"]),
        seed=pick("seed", _DEFAULTS["seed"]),
        samples=pick("samples", _DEFAULTS["samples"]),
        bound=pick("bound", None),
        tolerance=pick("tolerance", None),
        classify_tol=pick("classify_tol", None),
        initial=pick("initial", _DEFAULTS["initial"]),
        preset=preset_name,
        input=pick("input", None),
        r=pick("r", None),
        band=bool(pick("band", False)),
        no_plots=bool(pick("no_plots", False)),
        simulate=bool(pick("simulate", False)),
        rk2=bool(pick("rk2", False)),
    )
    if cfg.grid < 8:
        raise ConfigError(f"field grid: need at least 8 cells, got {cfg.grid}")
    if cfg.scheme not in ("central", "riemann"):
        raise ConfigError(f"field scheme: unknown scheme {cfg.scheme!r}")
    if not (0.0 < cfg.cfl <= 1.0):
        raise ConfigError(f"field cfl: must lie in (0, 1], got {cfg.cfl}")
    if cfg.t_end <= 0.0:
        raise ConfigError(f"field t_end: must be positive, got {cfg.t_end}")
    if cfg.threshold <= 0.0:
        raise ConfigError(f"field threshold: must be positive, got {cfg.threshold}")
    if cfg.samples < 0:
        raise ConfigError(f"field samples: must be >= 0, got {cfg.samples}")
    return cfg


def _json_dump(payload: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(
        scheme=cfg.scheme,
        cfl=cfg.cfl,
        t_end=cfg.t_end,
        blowup_threshold=cfg.threshold,
        snapshot_every=cfg.snapshot_every,
        rk2=cfg.rk2,
    )


def _auto_classify_tol(cfg: RunConfig) -> float:
    """5x the stationary family's drift at the same grid/scheme/cfl."""
    if cfg.classify_tol is not None:
        return cfg.classify_tol
    base0 = sample_field(PRESETS["traveling"]["initial"], TorusGrid(cfg.grid))
    baseline = run(base0, _solver_config(cfg))
    drift = float(np.max(np.abs(baseline.snapshots[-1].U - base0.U)))
    return max(5.0 * drift, 1e-11)


def cmd_verify(cfg: RunConfig) -> int:
    tolerances = None
    if cfg.tolerance is not None:
        tolerances = {name: cfg.tolerance for name, _, _ in IDENTITY_SPECS}
    kwargs = {}
    if cfg.band:
        kwargs.update(box=0.6, disc_min=0.001, disc_max=0.01, gap_min=0.0,
                      second_gap_fraction=0.05)
    reports = run_identity_suite(cfg.samples, cfg.seed, tolerances=tolerances, **kwargs)
    write_report(
        reports,
        cfg.out / "verify.json",
        extra={"seed": cfg.seed, "n_samples": cfg.samples, "band": cfg.band},
    )
    failed = [r.identity for r in reports if not r.passed]
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.identity} "
              f"(max_rel={r.max_rel_err:.3e}, max_abs={r.max_abs_err:.3e})")
    return 1 if failed else 0


def cmd_simulate(cfg: RunConfig) -> int:
    state0 = sample_field(cfg.initial, TorusGrid(cfg.grid))
    traj = run(state0, _solver_config(cfg))
    write_snapshots_csv(traj.snapshots, cfg.out / "snapshots.csv")
    _json_dump(traj.summary(), cfg.out / "trajectory.json")
    report = classify_trajectory(traj, tol=_auto_classify_tol(cfg))
    _json_dump(report.to_json_dict(), cfg.out / "classification.json")
    if not cfg.no_plots:
        from . import plots

        plots.simulation_figures(traj, cfg.out)
    print(f"stopped: {traj.stopped_reason.value} at t={traj.snapshots[-1].t:.6g}")
    if traj.blowup_time_observed is not None:
        print(f"blow-up observed at t={traj.blowup_time_observed:.6g}")
    print(f"verdict: {report.verdict.value}")
    return 0


def cmd_blowup(cfg: RunConfig) -> int:
    state0 = sample_field(cfg.initial, TorusGrid(cfg.grid))
    payload: dict = {"grid": cfg.grid, "initial": cfg.initial}

    def predict(trajectory=None):
        try:
            tstar, family, q0 = predict_blowup(
                state0, trajectory=trajectory, t_limit=max(4.0 * cfg.t_end, 10.0)
            )
            return {"tstar": tstar, "family": family, "q0": q0}
        except NoBlowupPredictedError:
            return None

    frozen = predict()
    payload["prediction_frozen"] = frozen
    print("frozen-coefficient prediction:",
          "none (all slopes decay)" if frozen is None else
          f"t*={frozen['tstar']:.6g} (family {frozen['family']}, q0={frozen['q0']:.4g})")

    traj = None
    inconsistent = False
    if cfg.simulate:
        traj = run(state0, _solver_config(cfg))
        write_snapshots_csv(traj.snapshots, cfg.out / "snapshots.csv")
        _json_dump(traj.summary(), cfg.out / "trajectory.json")
        evolved = predict(trajectory=traj)
        payload["prediction_evolved"] = evolved
        t_obs = traj.blowup_time_observed
        payload["t_obs"] = t_obs
        payload["stopped_reason"] = traj.stopped_reason.value
        blew = traj.stopped_reason is StopReason.BLOWUP_DETECTED
        if blew and frozen is None:
            inconsistent = True
        if not blew and frozen is not None and frozen["tstar"] <= 0.8 * cfg.t_end:
            inconsistent = True
        payload["consistent"] = not inconsistent
        for label, pred in (("frozen", frozen), ("evolved", evolved)):
            if pred is not None and t_obs is not None:
                gap = abs(t_obs - pred["tstar"]) / pred["tstar"]
                payload[f"relative_gap_{label}"] = gap
                print(f"observed t={t_obs:.6g} vs {label} t*={pred['tstar']:.6g} "
                      f"(relative gap {gap:.3f})")

    if frozen is not None:
        source = traj if traj is not None else state0
        path_obj = trace(
            source, family=frozen["family"], q0=frozen["q0"],
            t_limit=frozen["tstar"] * 1.05, path_dt=2e-3,
        )
        path_obj.write_csv(cfg.out / "char_path.csv")
        z_closed, tstar_path = z_transport(path_obj)
        path_obj.predicted_tstar = tstar_path
        if not cfg.no_plots:
            from . import plots

            plots.blowup_figures(path_obj, z_closed, tstar_path, cfg.out)
    _json_dump(payload, cfg.out / "blowup.json")
    return 3 if inconsistent else 0


def cmd_maclane(cfg: RunConfig) -> int:
    if cfg.r is not None:
        try:
            r = np.array([float(x) for x in cfg.r.split(",")])
        except ValueError as exc:
            raise ConfigError(f"field r: expected comma-separated reals: {exc}") from exc
        violations = admissible_violations(r, len(r))
        if violations:
            print("not admissible:")
            for v in violations:
                print(" ", v)
        else:
            print("admissible: a strictly hyperbolic preimage exists")
        _json_dump({"r": list(map(float, r)), "admissible": not violations,
                    "violations": violations}, cfg.out / "maclane.json")
        return 0

    rng = np.random.default_rng(cfg.seed)
    if cfg.band:
        samples = sample_hyperbolic_box(rng, cfg.samples, box=2.0,
                                        disc_min=0.001, disc_max=0.01)
    else:
        samples = sample_hyperbolic_box(rng, cfg.samples, box=2.0, disc_min=0.01)
    bound = cfg.bound if cfg.bound is not None else (1e-6 if cfg.band else 1e-9)
    errors = []
    for u_star in samples:
        r = maclane_forward(u_star)
        delta = 0.01 * rng.uniform(-1, 1, size=3)
        while classify_regime(u_star + delta) is not Regime.HYPERBOLIC:
            delta *= 0.5
        try:
            u_back = maclane_inverse(r, u_star + delta, tol_newton=1e-12)
            errors.append(float(np.max(np.abs(u_back.u - u_star))))
        except (NotAdmissibleError, NewtonDivergedError):
            errors.append(float("inf"))
    max_err = max(errors) if errors else 0.0
    payload = {
        "n_samples": cfg.samples,
        "seed": cfg.seed,
        "band": cfg.band,
        "bound": bound,
        "max_round_trip_error": max_err,
        "pass": bool(max_err < bound),
    }
    _json_dump(payload, cfg.out / "maclane.json")
    if not cfg.no_plots and errors:
        from . import plots

        plots.maclane_figure(errors, cfg.out)
    print(f"round trip over {cfg.samples} samples: max error {max_err:.3e} "
          f"({'PASS' if payload['pass'] else 'FAIL'} at bound {bound:g})")
    return 0 if payload["pass"] else 1


def cmd_classify(cfg: RunConfig) -> int:
    if cfg.input is None:
        raise ConfigError("field input: classify needs --input snapshots.csv")
    try:
        states = read_snapshots_csv(cfg.input)
    except (OSError, BadSpecError, ValueError) as exc:
        raise ConfigError(f"field input: {exc}") from exc
    if len(states) < 2:
        raise ConfigError("field input: need at least two snapshots")
    from .evolve import Trajectory

    traj = Trajectory(snapshots=states)
    tol = cfg.classify_tol if cfg.classify_tol is not None else 1e-2
    report = classify_trajectory(traj, tol=tol)
    _json_dump(report.to_json_dict(), cfg.out / "classification.json")
    print(f"verdict: {report.verdict.value} "
          f"(dt={report.dt_residual:.3e}, u2={report.u2_residual:.3e}, "
          f"square={report.square_residual:.3e})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="benneylab",
        description="Quasi-linear field laboratory: identity verification, "
        "evolution, blow-up prediction, and structure classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file mirroring the flags")
        p.add_argument("--preset", help=f"one of {sorted(PRESETS)}")
        p.add_argument("--grid", type=int, help="number of grid cells")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", help="output directory (created if missing)")
        p.add_argument("--scheme", choices=["central", "riemann"])
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--cfl", type=float)
        p.add_argument("--no-plots", dest="no_plots", action="store_const", const=True)

    p = sub.add_parser("verify", help="run the finite-difference identity suite")
    common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--tolerance", type=float, help="override every identity tolerance")
    p.add_argument("--band", action="store_const", const=True,
                   help="sample the near-degenerate band instead of the main box")

    p = sub.add_parser("simulate", help="evolve initial data and classify the result")
    common(p)
    p.add_argument("--initial", help="initial-data description string")
    p.add_argument("--threshold", type=float, help="gradient blow-up threshold")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--classify-tol", dest="classify_tol", type=float)
    p.add_argument("--rk2", action="store_const", const=True)

    p = sub.add_parser("blowup", help="predict gradient blow-up along characteristics")
    common(p)
    p.add_argument("--initial", help="initial-data description string")
    p.add_argument("--threshold", type=float)
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--simulate", action="store_const", const=True,
                   help="also run the solver and compare prediction vs observation")

    p = sub.add_parser("maclane", help="round-trip statistics of the coordinate map")
    common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--bound", type=float, help="round-trip error bound")
    p.add_argument("--band", action="store_const", const=True,
                   help="sample the near-degenerate band (looser default bound)")
    p.add_argument("--r", help="check admissibility of an explicit r vector a,b,c")

    p = sub.add_parser("classify", help="classify a snapshots CSV")
    common(p)
    p.add_argument("--input", help="snapshots.csv from a previous run")
    p.add_argument("--classify-tol", dest="classify_tol", type=float)

    return parser


COMMANDS = {
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "blowup": cmd_blowup,
    "maclane": cmd_maclane,
    "classify": cmd_classify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args.command, args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BadSpecError as exc:
        print(f"config error: bad initial data: {exc}", file=sys.stderr)
        return 2
    except BenneyLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
