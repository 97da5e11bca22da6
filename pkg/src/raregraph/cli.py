"""Command-line pipeline: generate, fit, score, eval, crossval.

Every subcommand reads an optional JSON config file (``--config``) whose
keys mirror the command-line flags; explicit flags win over config values,
which win over defaults.  Each run writes ``<command>_manifest.json`` into
the output directory recording the effective configuration, a SHA-256 of
every input and output file, and library versions — with no timestamps, so
a rerun with the same seed and config produces byte-identical artifacts.

Exit codes: 0 success, 1 data/config errors (diagnostic on stderr),
2 usage errors (bad flags or subcommand).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .cohort import load_cohort
from .errors import ParameterError, ParseError, RaregraphError
from .evaluation import (
    DEFAULT_SENSITIVITY_GRID,
    crossval,
    curve_and_auc,
    save_curve_csv,
    save_folds_csv,
    save_metrics_json,
)
from .graph_engine import (
    DEFAULT_DAMPING,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    build,
    load_scores,
    run_inference,
    save_scores,
)
from .learning import (
    DEFAULT_PRIOR_ETA,
    DEFAULT_SMOOTHING,
    fit,
    load_params,
    save_params,
)
from .synthgen import (
    gen_config_from_json_dict,
    gen_config_to_json_dict,
    generate_to_directory,
)

_SHARED_KEYS = {"seed"}
_COMMAND_KEYS = {
    "generate": {"num_physicians", "num_patients", "prior_eta", "signal",
                 "degree_mean", "claims_rate", "wiring",
                 "positive_physician_fraction", "params"},
    "fit": {"prior_eta", "smoothing"},
    "score": {"damping", "tol", "max_iters", "respect_labels"},
    "eval": {"sensitivity_grid"},
    "crossval": {"folds", "damping", "tol", "max_iters", "smoothing",
                 "prior_eta", "sensitivity_grid"},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raregraph",
        description="Bipartite physician-patient targeting pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file; flags override its keys")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--in", dest="in_dir", type=Path, default=None,
                       help="input directory")
        p.add_argument("--out", dest="out_dir", type=Path, required=True,
                       help="output directory (created if missing)")

    def add_inference(p):
        p.add_argument("--damping", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iters", type=int, default=None)

    p = sub.add_parser("generate", help="sample a synthetic cohort")
    add_common(p)

    p = sub.add_parser("fit", help="learn model parameters from a cohort")
    add_common(p)

    p = sub.add_parser("score", help="run inference and write posteriors")
    add_common(p)
    add_inference(p)
    p.add_argument("--params", type=Path, default=None,
                   help="params.json path (default: <in>/params.json)")

    p = sub.add_parser("eval", help="score quality against known labels")
    add_common(p)
    p.add_argument("--scores", type=Path, default=None,
                   help="scores.csv path (default: <in>/scores.csv)")
    p.add_argument("--sensitivity-grid", type=str, default=None,
                   help="comma-separated sensitivity targets")

    p = sub.add_parser("crossval", help="k-fold comparison vs the baseline")
    add_common(p)
    add_inference(p)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--sensitivity-grid", type=str, default=None)
    return parser


# --------------------------------------------------------------------------
# Config plumbing
# --------------------------------------------------------------------------


def _load_config_file(path: Path | None, command: str) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    allowed = _COMMAND_KEYS[command] | _SHARED_KEYS
    unknown = set(doc) - allowed
    if unknown:
        raise ParameterError(
            f"{path}: unknown config keys for {command!r}: {sorted(unknown)}"
        )
    return doc


def _parse_grid(value):
    if isinstance(value, str):
        try:
            grid = tuple(float(v) for v in value.split(","))
        except ValueError:
            raise ParameterError(
                f"sensitivity grid must be comma-separated floats, got {value!r}"
            ) from None
    else:
        grid = tuple(float(v) for v in value)
    if not grid or any(not 0.0 < g <= 1.0 for g in grid):
        raise ParameterError("sensitivity targets must lie in (0, 1]")
    return grid


def _effective(ns, config: dict, key: str, default, flag_attr: str = None):
    """Flag beats config value beats default."""
    flag = getattr(ns, flag_attr or key, None)
    if flag is not None:
        return flag
    return config.get(key, default)


def _require_in_dir(ns) -> Path:
    if ns.in_dir is None:
        raise ParameterError("this command needs --in DIR")
    return ns.in_dir


# --------------------------------------------------------------------------
# Manifest
# --------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, effective: dict,
                    inputs, outputs) -> None:
    doc = {
        "command": command,
        "config": effective,
        "config_hash": hashlib.sha256(
            json.dumps(effective, sort_keys=True).encode()
        ).hexdigest(),
        # keyed by file name so a rerun in another directory still produces a
        # byte-identical manifest
        "inputs": {Path(p).name: _sha256(Path(p)) for p in inputs},
        "outputs": {name: _sha256(out_dir / name) for name in outputs},
        "versions": {
            "raregraph": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _cohort_inputs(in_dir: Path):
    return [in_dir / name for name in
            ("patients.csv", "physicians.csv", "edges.csv", "schema.json")]


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def _cmd_generate(ns, config: dict) -> int:
    doc = dict(config)
    if ns.seed is not None:
        doc["seed"] = ns.seed
    gen_config = gen_config_from_json_dict(doc)
    out = ns.out_dir
    out.mkdir(parents=True, exist_ok=True)
    generate_to_directory(gen_config, out)
    inputs = [ns.config] if ns.config else []
    _write_manifest(out, "generate", gen_config_to_json_dict(gen_config), inputs,
                    ["patients.csv", "physicians.csv", "edges.csv",
                     "schema.json", "gentruth.json"])
    return 0


def _cmd_fit(ns, config: dict) -> int:
    in_dir = _require_in_dir(ns)
    cohort = load_cohort(in_dir)
    prior_eta = _effective(ns, config, "prior_eta", DEFAULT_PRIOR_ETA)
    smoothing = _effective(ns, config, "smoothing", DEFAULT_SMOOTHING)
    params = fit(cohort, smoothing=smoothing, prior_eta=prior_eta)
    out = ns.out_dir
    out.mkdir(parents=True, exist_ok=True)
    save_params(params, out / "params.json")
    effective = {"prior_eta": prior_eta, "smoothing": smoothing}
    inputs = _cohort_inputs(in_dir) + ([ns.config] if ns.config else [])
    _write_manifest(out, "fit", effective, inputs, ["params.json"])
    return 0


def _cmd_score(ns, config: dict) -> int:
    in_dir = _require_in_dir(ns)
    params_path = ns.params if ns.params is not None else in_dir / "params.json"
    cohort = load_cohort(in_dir)
    params = load_params(params_path)
    damping = _effective(ns, config, "damping", DEFAULT_DAMPING)
    tol = _effective(ns, config, "tol", DEFAULT_TOL)
    max_iters = _effective(ns, config, "max_iters", DEFAULT_MAX_ITERS)
    respect = bool(config.get("respect_labels", False))
    graph = build(cohort, params, respect_labels=respect)
    result = run_inference(graph, damping=damping, tol=tol, max_iters=max_iters)
    out = ns.out_dir
    out.mkdir(parents=True, exist_ok=True)
    save_scores(result, out / "scores.csv")
    effective = {"damping": damping, "tol": tol, "max_iters": max_iters,
                 "respect_labels": respect}
    inputs = _cohort_inputs(in_dir) + [params_path] + (
        [ns.config] if ns.config else []
    )
    _write_manifest(out, "score", effective, inputs, ["scores.csv"])
    return 0


def _cmd_eval(ns, config: dict) -> int:
    in_dir = _require_in_dir(ns)
    scores_path = ns.scores if ns.scores is not None else in_dir / "scores.csv"
    cohort = load_cohort(in_dir)
    frame = load_scores(scores_path)
    phys = frame[frame["entity_type"] == "physician"]
    score_map = dict(zip(phys["entity_id"], phys["posterior_positive"]))

    labels = cohort.physicians.labels
    if np.any(labels < 0):
        raise ParameterError("eval requires a physician label on every record")
    label_map = dict(zip(cohort.physicians.ids.tolist(), labels.tolist()))
    missing = set(label_map) - set(score_map)
    if missing:
        raise ParameterError(
            f"{scores_path}: no score for physicians {sorted(missing)[:5]}"
        )
    score_map = {k: score_map[k] for k in label_map}

    grid_value = _effective(ns, config, "sensitivity_grid", None,
                            flag_attr="sensitivity_grid")
    grid = _parse_grid(grid_value) if grid_value else DEFAULT_SENSITIVITY_GRID
    report = curve_and_auc(score_map, label_map, sensitivity_grid=grid)
    out = ns.out_dir
    out.mkdir(parents=True, exist_ok=True)
    save_metrics_json(report, out / "metrics.json")
    save_curve_csv(report, out / "curve.csv")
    effective = {"sensitivity_grid": list(grid)}
    inputs = _cohort_inputs(in_dir) + [scores_path] + (
        [ns.config] if ns.config else []
    )
    _write_manifest(out, "eval", effective, inputs, ["metrics.json", "curve.csv"])
    return 0


def _cmd_crossval(ns, config: dict) -> int:
    in_dir = _require_in_dir(ns)
    cohort = load_cohort(in_dir)
    seed = _effective(ns, config, "seed", 0)
    folds = _effective(ns, config, "folds", 10)
    grid_value = _effective(ns, config, "sensitivity_grid", None,
                            flag_attr="sensitivity_grid")
    grid = _parse_grid(grid_value) if grid_value else DEFAULT_SENSITIVITY_GRID
    settings = {
        "damping": _effective(ns, config, "damping", DEFAULT_DAMPING),
        "tol": _effective(ns, config, "tol", DEFAULT_TOL),
        "max_iters": _effective(ns, config, "max_iters", DEFAULT_MAX_ITERS),
        "smoothing": config.get("smoothing", DEFAULT_SMOOTHING),
        "prior_eta": config.get("prior_eta", DEFAULT_PRIOR_ETA),
    }
    report = crossval(cohort, folds=folds, seed=seed,
                      sensitivity_grid=grid, **settings)
    out = ns.out_dir
    out.mkdir(parents=True, exist_ok=True)
    save_folds_csv(report, out / "folds.csv")
    (out / "crossval.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )
    effective = {"folds": folds, "seed": seed,
                 "sensitivity_grid": list(grid), **settings}
    inputs = _cohort_inputs(in_dir) + ([ns.config] if ns.config else [])
    _write_manifest(out, "crossval", effective, inputs,
                    ["folds.csv", "crossval.json"])
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "crossval": _cmd_crossval,
}


def run(argv=None) -> int:
    """Parse argv and execute one subcommand; returns the exit status."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _load_config_file(ns.config, ns.command)
        return _COMMANDS[ns.command](ns, config)
    except (RaregraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
