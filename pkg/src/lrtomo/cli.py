"""Command-line front end.

One binary with subcommands; every command is deterministic given its
full configuration (flags > config file > defaults), and primary outputs
are byte-identical across reruns apart from a timestamp field that
``--no-timestamp`` suppresses.

Exit codes: 0 success, 2 validation/usage error, 3 numerical
non-convergence, 4 enumeration cap exceeded.  Failures emit a
machine-readable JSON object on standard error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import io as io_mod
from .bloch import bloch_to_state, state_to_bloch
from .errors import (
    ConvergenceError,
    DomainError,
    EnumerationCapError,
    ValidationError,
)
from .likelihood import loglikelihood_ratio
from .region import build_region, region_report
from .states import DensityMatrix, pauli_settings, simulate_dataset
from .studies import (
    DatasetEnumeration,
    coverage_mc,
    exhaustive_ccdf,
    naive_ellipsoid_baseline,
    pr_study,
    state_dependent_cutoff,
)
from .threshold import (
    ChiSquare,
    Eq9Bound,
    FixedCutoff,
    Lemma1,
    rule_from_name,
    solve_threshold,
)

RULE_NAMES = ("chi2", "eq9", "lemma1")

DEFAULTS = {
    "analyze": {
        "alpha": 0.9,
        "rule": "chi2",
        "observable": [],
        "boundary_samples": 64,
        "out": None,
        "no_timestamp": False,
    },
    "threshold": {
        "alpha": 0.9,
        "rule": "chi2",
        "k": None,
        "copies": None,
        "dim": None,
        "out": None,
    },
    "simulate": {
        "state": "mixed",
        "shots": 20,
        "seed": 0,
        "out": None,
        "no_timestamp": False,
    },
    "coverage": {
        "state": "mixed",
        "shots": 20,
        "rule": "eq9",
        "alpha": 0.9,
        "trials": 1000,
        "seed": 0,
        "cutoff": None,
        "cap": 1_000_000,
        "out": None,
        "no_timestamp": False,
    },
    "ccdf": {
        "model": "coin",
        "p": 0.5,
        "state": None,
        "shots": 2,
        "cap": 1_000_000,
        "seed": 0,
        "trials": 0,
        "out": None,
        "no_timestamp": False,
    },
    "cutoff": {
        "shots": 60,
        "alpha": 0.9,
        "grid": 21,
        "cap": 1_000_000,
        "seed": 0,
        "trials": 0,
        "out": None,
        "no_timestamp": False,
    },
    "propt": {
        "states": 21,
        "shots": 10,
        "alpha": 0.9,
        "challengers": 50,
        "seed": 0,
        "trials": 0,
        "cap": 1_000_000,
        "out": None,
        "no_timestamp": False,
    },
    "compare": {
        "alpha": 0.9,
        "rule": "chi2",
        "trials": 2000,
        "seed": 0,
        "volume_samples": 100_000,
        "out": None,
        "no_timestamp": False,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrtomo",
        description="Loglikelihood-ratio confidence regions for tomography data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(p, *names, **kw):
        kw.setdefault("default", S)
        p.add_argument(*names, **kw)

    p = sub.add_parser("analyze", help="region report for a dataset file")
    p.add_argument("dataset", help="path to a dataset JSON file")
    add(p, "--config", help="JSON config file (flags override it)")
    add(p, "--alpha", type=float)
    add(p, "--rule", choices=RULE_NAMES)
    add(p, "--observable", action="append", help="x|y|z|identity or a matrix JSON file")
    add(p, "--boundary-samples", dest="boundary_samples", type=int)
    add(p, "--out")
    add(p, "--no-timestamp", dest="no_timestamp", action="store_true")

    p = sub.add_parser("threshold", help="cutoff table for one rule")
    add(p, "--config")
    add(p, "--alpha", type=float)
    add(p, "--rule", choices=RULE_NAMES)
    add(p, "--k", type=int, help="degrees of freedom (chi2/eq9)")
    add(p, "--copies", type=int, help="total copies N (lemma1)")
    add(p, "--dim", type=int, help="Hilbert dimension d (lemma1)")
    add(p, "--out")

    p = sub.add_parser("simulate", help="simulate a Pauli tomography dataset")
    add(p, "--config")
    add(p, "--state", help='"bx,by,bz" Bloch vector or "mixed"')
    add(p, "--shots", type=int, help="shots per Pauli setting")
    add(p, "--seed", type=int)
    add(p, "--out")
    add(p, "--no-timestamp", dest="no_timestamp", action="store_true")

    p = sub.add_parser("coverage", help="Monte Carlo coverage of a rule")
    add(p, "--config")
    add(p, "--state")
    add(p, "--shots", type=int)
    add(p, "--rule", choices=RULE_NAMES)
    add(p, "--alpha", type=float)
    add(p, "--trials", type=int)
    add(p, "--seed", type=int)
    add(p, "--cutoff", help="fixed cutoff override; accepts inf")
    add(p, "--cap", type=int)
    add(p, "--out")
    add(p, "--no-timestamp", dest="no_timestamp", action="store_true")

    p = sub.add_parser("ccdf", help="exhaustive CCDF of the ratio statistic")
    add(p, "--config")
    add(p, "--model", choices=("coin", "qubit"))
    add(p, "--p", type=float, help="coin heads probability")
    add(p, "--state", help="qubit Bloch vector")
    add(p, "--shots", type=int)
    add(p, "--cap", type=int)
    add(p, "--seed", type=int)
    add(p, "--trials", type=int)
    add(p, "--out")
    add(p, "--no-timestamp", dest="no_timestamp", action="store_true")

    p = sub.add_parser("cutoff", help="state-dependent cutoff grid (coin)")
    add(p, "--config")
    add(p, "--shots", type=int)
    add(p, "--alpha", type=float)
    add(p, "--grid", type=int, help="number of expectation grid points")
    add(p, "--cap", type=int)
    add(p, "--seed", type=int)
    add(p, "--trials", type=int)
    add(p, "--out")
    add(p, "--no-timestamp", dest="no_timestamp", action="store_true")

    p = sub.add_parser("propt", help="probability-ratio optimality study")
    add(p, "--config")
    add(p, "--states", type=int, help="coin state-grid size")
    add(p, "--shots", type=int)
    add(p, "--alpha", type=float)
    add(p, "--challengers", type=int)
    add(p, "--seed", type=int)
    add(p, "--trials", type=int)
    add(p, "--cap", type=int)
    add(p, "--out")
    add(p, "--no-timestamp", dest="no_timestamp", action="store_true")

    p = sub.add_parser("compare", help="error-bar baseline vs the ratio region")
    p.add_argument("dataset", help="path to a dataset JSON file")
    add(p, "--config")
    add(p, "--alpha", type=float)
    add(p, "--rule", choices=RULE_NAMES)
    add(p, "--trials", type=int, help="calibration trials per grid state")
    add(p, "--seed", type=int)
    add(p, "--volume-samples", dest="volume_samples", type=int)
    add(p, "--out")
    add(p, "--no-timestamp", dest="no_timestamp", action="store_true")

    return parser


def _resolve_config(command: str, provided: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    path = provided.pop("config", None)
    if path is not None:
        try:
            file_cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config file {path!r}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ValidationError("config file must hold a JSON object")
        for key, value in file_cfg.items():
            dest = key.replace("-", "_")
            if dest not in cfg:
                raise ValidationError(f"config key {key!r} unknown for {command!r}")
            cfg[dest] = value
    cfg.update(provided)
    return cfg


def _parse_state(spec: str) -> DensityMatrix:
    if spec == "mixed":
        return DensityMatrix.maximally_mixed(2)
    try:
        parts = [float(x) for x in spec.split(",")]
    except ValueError as exc:
        raise ValidationError(f"cannot parse state spec {spec!r}") from exc
    if len(parts) != 3:
        raise ValidationError("qubit state spec needs three Bloch components")
    return bloch_to_state(np.array(parts), 2)


def _parse_observable(spec: str, dim: int) -> tuple[str, np.ndarray]:
    named = {
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    if spec in named:
        if dim != 2:
            raise ValidationError(f"named observable {spec!r} requires dimension 2")
        return spec, named[spec]
    if spec == "identity":
        return spec, np.eye(dim, dtype=complex)
    try:
        obj = json.loads(Path(spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read observable {spec!r}: {exc}") from exc
    arr = np.array([[complex(e[0], e[1]) for e in row] for row in obj])
    return Path(spec).stem, arr


def _timestamp_field(cfg: dict) -> dict:
    if cfg.get("no_timestamp"):
        return {}
    return {"generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat()}


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_csv(header: str, rows, out: str | None, cfg: dict) -> None:
    lines = []
    stamp = _timestamp_field(cfg)
    if stamp:
        lines.append(f"# generated_at {stamp['generated_at']}")
    lines.append(header)
    for row in rows:
        lines.append(",".join(str(x) for x in row))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _threshold_rule(cfg: dict):
    name = cfg["rule"]
    if name == "lemma1":
        if cfg.get("copies") is None or cfg.get("dim") is None:
            raise ValidationError("rule lemma1 needs --copies and --dim")
        return Lemma1(cfg["copies"], cfg["dim"])
    if cfg.get("k") is None:
        raise ValidationError(f"rule {name} needs --k")
    return ChiSquare(cfg["k"]) if name == "chi2" else Eq9Bound(cfg["k"])


# --------------------------------------------------------------------------
# Command implementations.

def cmd_analyze(cfg: dict) -> int:
    dataset = io_mod.load_dataset(cfg["dataset"])
    rule = rule_from_name(cfg["rule"], dataset)
    region = build_region(dataset, cfg["alpha"], rule)
    observables = {}
    for spec in cfg["observable"] or []:
        name, mat = _parse_observable(spec, dataset.dim)
        observables[name] = mat
    report, rows = region_report(
        region, observables=observables, n_boundary=cfg["boundary_samples"]
    )
    report["lambda_mixed"] = loglikelihood_ratio(
        dataset, DensityMatrix.maximally_mixed(dataset.dim), region.mle
    )
    report.update(_timestamp_field(cfg))
    out = cfg["out"]
    if out and rows:
        boundary_path = Path(out).with_name(Path(out).stem + "_boundary.csv")
        _write_csv(
            "direction_x,direction_y,direction_z,bx,by,bz,clipped",
            rows,
            str(boundary_path),
            cfg,
        )
        report["boundary_csv"] = boundary_path.name
    _write_json(report, out)
    return 0


def cmd_threshold(cfg: dict) -> int:
    rule = _threshold_rule(cfg)
    lam = solve_threshold(rule, cfg["alpha"])
    k = cfg.get("k") if cfg["rule"] in ("chi2", "eq9") else ""
    copies = cfg.get("copies") if cfg["rule"] == "lemma1" else ""
    dim = cfg.get("dim") if cfg["rule"] == "lemma1" else ""
    rows = [(cfg["rule"], k, copies, dim, cfg["alpha"], f"{lam:.9f}")]
    _write_csv("rule,k,N,d,alpha,lambda_alpha", rows, cfg["out"], {"no_timestamp": True})
    return 0


def cmd_simulate(cfg: dict) -> int:
    state = _parse_state(cfg["state"])
    settings = [(povm, cfg["shots"]) for povm in pauli_settings()]
    dataset = simulate_dataset(state, settings, cfg["seed"])
    payload = io_mod.dataset_to_dict(dataset)
    payload.update(_timestamp_field(cfg))
    _write_json(payload, cfg["out"])
    return 0


def cmd_coverage(cfg: dict) -> int:
    state = _parse_state(cfg["state"])
    settings = pauli_settings()
    if cfg.get("cutoff") is not None:
        rule = FixedCutoff(float(cfg["cutoff"]))
    else:
        k = 3
        rule = {
            "chi2": ChiSquare(k),
            "eq9": Eq9Bound(k),
            "lemma1": Lemma1(3 * cfg["shots"], 2),
        }[cfg["rule"]]
    report = coverage_mc(
        state, settings, cfg["shots"], rule, cfg["alpha"], cfg["trials"], cfg["seed"]
    )
    payload = {
        "true_state_bloch": [float(x) for x in state_to_bloch(state)],
        "trials": report.trials,
        "hits": report.hits,
        "coverage": report.coverage,
        "wilson_interval": list(report.wilson_interval),
        "rule": report.rule.label,
        "alpha": report.alpha,
        "cutoff": report.cutoff if np.isfinite(report.cutoff) else "inf",
        "solver_failures": report.solver_failures,
        "seed": report.seed,
    }
    payload.update(_timestamp_field(cfg))
    _write_json(payload, cfg["out"])
    return 0


def _coin_setting():
    for povm in pauli_settings():
        if povm.name == "sigma_z":
            return povm
    raise RuntimeError("unreachable")


def cmd_ccdf(cfg: dict) -> int:
    if cfg["model"] == "coin":
        z = 2.0 * cfg["p"] - 1.0
        state = bloch_to_state(np.array([0.0, 0.0, z]), 2)
        settings = [_coin_setting()]
    else:
        if cfg.get("state") is None:
            raise ValidationError("qubit model needs --state")
        state = _parse_state(cfg["state"])
        settings = pauli_settings()
    curve = exhaustive_ccdf(state, settings, cfg["shots"], cap=cfg["cap"])
    _write_csv("lambda,F", curve.rows(), cfg["out"], cfg)
    return 0


def cmd_cutoff(cfg: dict) -> int:
    settings = [_coin_setting()]
    enum = DatasetEnumeration(settings, cfg["shots"], cap=cfg["cap"])
    rows = []
    for z in np.linspace(-1.0, 1.0, cfg["grid"]):
        state = bloch_to_state(np.array([0.0, 0.0, z]), 2)
        cut = state_dependent_cutoff(
            state, settings, cfg["shots"], cfg["alpha"], cap=cfg["cap"], enumeration=enum
        )
        rows.append((f"{z:.6f}", f"{cut:.9f}"))
    _write_csv("expectation_z,cutoff", rows, cfg["out"], cfg)
    return 0


def cmd_propt(cfg: dict) -> int:
    result = pr_study(
        p_grid=np.linspace(0.0, 1.0, cfg["states"]),
        shots=cfg["shots"],
        alpha=cfg["alpha"],
        n_challengers=cfg["challengers"],
        seed=cfg["seed"],
    )
    result.update(_timestamp_field(cfg))
    _write_json(result, cfg["out"])
    return 0


def cmd_compare(cfg: dict) -> int:
    dataset = io_mod.load_dataset(cfg["dataset"])
    rule = rule_from_name(cfg["rule"], dataset)
    report = naive_ellipsoid_baseline(
        dataset,
        cfg["alpha"],
        calibration_trials=cfg["trials"],
        seed=cfg["seed"],
        rule=rule,
        volume_samples=cfg["volume_samples"],
    )
    payload = {
        "alpha": report.alpha,
        "rule": report.rule.label,
        "lr_cutoff": report.lr_cutoff,
        "lr_volume": report.lr_volume,
        "baseline_volume": report.baseline_volume,
        "baseline_scale": report.scale,
        "baseline_radii": [float(r) for r in report.radii],
        "min_calibrated_coverage": report.min_calibrated_coverage,
        "calibration_trials": report.calibration_trials,
        "seed": report.seed,
    }
    payload.update(_timestamp_field(cfg))
    _write_json(payload, cfg["out"])
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "threshold": cmd_threshold,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "ccdf": cmd_ccdf,
    "cutoff": cmd_cutoff,
    "propt": cmd_propt,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    provided = vars(args)
    command = provided.pop("command")
    try:
        cfg = _resolve_config(command, provided)
        return COMMANDS[command](cfg)
    except (ValidationError, DomainError) as exc:
        _emit_error(exc, 2)
        return 2
    except ConvergenceError as exc:
        _emit_error(exc, 3)
        return 3
    except EnumerationCapError as exc:
        _emit_error(exc, 4)
        return 4


def _emit_error(exc: Exception, code: int) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")


if __name__ == "__main__":
    sys.exit(main())
