"""Command-line entry point.

Subcommands: ``audit {perf,features,all}``, ``synth``, ``calibrate``,
``plot``. Exit codes: 0 success, 1 validation/config error, 2 data error,
3 statistical degeneracy. Diagnostics go to stderr as single
``level=... code=... msg="..."`` lines; all randomness flows from
``--seed`` (omitting it picks a random seed that is printed and embedded
in the report).

Configuration precedence: command-line flags override a ``--config`` JSON
file, which overrides built-in defaults. ``AUDIT_THREADS`` caps internal
parallelism and ``AUDIT_NUMBA=0`` selects the pure-numpy kernel path.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, hyptest, report as report_mod
from ._rng import derive_seed
from .cohort import (
    attach_features,
    load_cohort_csv,
    load_features_binary,
    load_features_csv,
    partition,
    save_cohort_csv,
    save_features_binary,
    absolute_error,
)
from .errors import AuditError, ConfigError, DataError
from .featspace import AgeBracketing
from .pipeline import (
    AuditConfig,
    assemble_report,
    build_provenance,
    report_to_dict,
    report_to_json,
    run_feature_audit,
    run_performance_audit,
)
from .synth import default_cohort_spec, generate_cohort, load_spec, null_cohort_spec, spec_to_json

_DEFAULTS = AuditConfig()


def _diag(level: str, code: str, msg: str) -> None:
    print(f'level={level} code={code} msg="{msg}"', file=sys.stderr)


def _parse_bandwidth(raw: str):
    try:
        return float(raw)
    except ValueError:
        return raw


def _parse_edges(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in raw.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse bracket edges {raw!r} (expected comma-separated numbers)") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biasaudit",
        description="Audit regression predictions for demographic subgroup bias.",
    )
    parser.add_argument("--version", action="version", version=f"biasaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    audit = sub.add_parser("audit", help="run the audit on a cohort")
    audit.add_argument("arm", choices=["perf", "features", "all"],
                       help="which audit arm(s) to run")
    audit.add_argument("--cohort", required=True, help="cohort CSV (id,age,predicted_age,sex,race)")
    audit.add_argument("--features", help="feature matrix: .csv (id,f0..) or FEATMAT1 binary")
    audit.add_argument("--feature-ids", help="sidecar id list for binary features "
                                             "(default: <features path> + '.ids')")
    audit.add_argument("--out", required=True, help="output directory")
    audit.add_argument("--config", help="JSON config file (flags override it)")
    audit.add_argument("--seed", type=int, help="master seed (default: random, printed)")
    audit.add_argument("--alpha", type=float, help=f"significance level (default {_DEFAULTS.alpha})")
    audit.add_argument("--sample-size", type=int,
                       help="balanced sample size per subgroup (default: smallest subgroup)")
    audit.add_argument("--repeats", type=int, help=f"balanced-draw repeats (default {_DEFAULTS.repeats})")
    audit.add_argument("--modes", type=int, help=f"PCA modes to analyze (default {_DEFAULTS.modes})")
    audit.add_argument("--levene-centering", choices=["mean", "median"],
                       help=f"Levene centering (default {_DEFAULTS.levene_centering})")
    audit.add_argument("--bandwidth", help=f"KDE bandwidth rule: scott, silverman, or a number "
                                           f"(default {_DEFAULTS.bandwidth_rule})")
    audit.add_argument("--bracket-edges", help="age-test bracket edges, e.g. 40,60,90 "
                                               f"(default {','.join(str(int(e)) for e in _DEFAULTS.bracket_edges)})")
    audit.add_argument("--viz-brackets", type=int,
                       help=f"equal-width age brackets for plots (default {_DEFAULTS.viz_brackets})")
    audit.add_argument("--grid-points", type=int,
                       help=f"KDE grid resolution (default {_DEFAULTS.grid_points})")
    audit.add_argument("--posthoc-adjust", action="store_true", default=None,
                       help="also BY-adjust each post-hoc family (default off)")
    audit.add_argument("--reuse-sixgroup-ranks", action="store_true", default=None,
                       help="post-hoc factor tests reuse the six-group ranking context (default off)")
    audit.add_argument("--no-full-pass", action="store_true", default=None,
                       help="skip the full-cohort pass (default: run it)")
    audit.add_argument("--no-balanced-pass", action="store_true", default=None,
                       help="skip the balanced pass (default: run it)")
    audit.add_argument("--save-scores", action="store_true",
                       help="also write the PCA mode scores as FEATMAT1 binary (default off)")

    synth = sub.add_parser("synth", help="generate a synthetic cohort")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--spec", help="cohort spec JSON (default: built-in imbalanced cohort)")
    synth.add_argument("--seed", type=int, help="override the spec seed (default: spec value, or random)")
    synth.add_argument("--no-features", action="store_true", help="skip the feature block")

    cal = sub.add_parser("calibrate", help="null-cohort Monte Carlo calibration of the battery")
    cal.add_argument("--trials", type=int, required=True, help="number of null cohorts (>= 100)")
    cal.add_argument("--alpha", type=float, default=0.05, help="significance level (default 0.05)")
    cal.add_argument("--seed", type=int, help="master seed (default: random, printed)")
    cal.add_argument("--sample-size", type=int, default=126,
                     help="subjects per subgroup in each null cohort (default 126)")
    cal.add_argument("--dim", type=int, default=8, help="feature dimension (default 8)")
    cal.add_argument("--modes", type=int, default=4, help="PCA modes tested (default 4)")
    cal.add_argument("--error-sd", type=float, default=2.0,
                     help="error SD of the null cohorts (default 2.0)")
    cal.add_argument("--out", help="optional directory for calibration.json")

    plot = sub.add_parser("plot", help="re-render figures and tables from a report JSON")
    plot.add_argument("--report", required=True, help="path to report.json")
    plot.add_argument("--out", required=True, help="output directory")
    return parser


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    chosen = secrets.randbits(63)
    _diag("info", "seed", f"seed={chosen} (chosen randomly; pass --seed {chosen} to replay)")
    return chosen


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    allowed = {f.name for f in dataclass_fields(AuditConfig)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{p}: unknown config keys {sorted(unknown)}")
    return data


def _build_config(args: argparse.Namespace) -> AuditConfig:
    values = {f.name: getattr(_DEFAULTS, f.name) for f in dataclass_fields(AuditConfig)}
    file_cfg = _load_config_file(args.config)
    if "bracket_edges" in file_cfg:
        file_cfg["bracket_edges"] = tuple(float(v) for v in file_cfg["bracket_edges"])
    values.update(file_cfg)

    flag_map = {
        "alpha": args.alpha,
        "sample_size": args.sample_size,
        "repeats": args.repeats,
        "modes": args.modes,
        "levene_centering": args.levene_centering,
        "bandwidth_rule": _parse_bandwidth(args.bandwidth) if args.bandwidth else None,
        "bracket_edges": _parse_edges(args.bracket_edges) if args.bracket_edges else None,
        "viz_brackets": args.viz_brackets,
        "grid_points": args.grid_points,
        "posthoc_adjust": args.posthoc_adjust,
        "reuse_sixgroup_ranks": args.reuse_sixgroup_ranks,
    }
    for key, val in flag_map.items():
        if val is not None:
            values[key] = val
    if args.no_full_pass:
        values["run_full_pass"] = False
    if args.no_balanced_pass:
        values["run_balanced_pass"] = False
    if args.seed is not None:
        values["seed"] = args.seed
    elif "seed" not in file_cfg:
        values["seed"] = _resolve_seed(None)
    cfg = AuditConfig(**values)
    cfg.validate()
    return cfg


def _load_features(args: argparse.Namespace):
    path = Path(args.features)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    with path.open("rb") as fh:
        magic = fh.read(8)
    if magic == b"FEATMAT1":
        ids_path = Path(args.feature_ids) if args.feature_ids else Path(str(path) + ".ids")
        return load_features_binary(path, ids_path)
    return load_features_csv(path)


def _cmd_audit(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out_dir = Path(args.out)
    want_features = args.arm in ("features", "all")
    want_perf = args.arm in ("perf", "all")
    if want_features and not args.features:
        raise ConfigError("audit features/all requires --features")

    records = load_cohort_csv(args.cohort)
    inputs: dict[str, str | Path] = {"cohort": args.cohort}
    features = None
    if args.features:
        features = _load_features(args)
        records, n_missing = attach_features(records, features)
        if n_missing:
            _diag("info", "features", f"{n_missing} subjects have no feature row")
        inputs["features"] = args.features
    part = partition(records)
    if part.excluded:
        _diag("info", "exclusions", f"{len(part.excluded)} subjects excluded from the audit")

    perf = run_performance_audit(part, config) if want_perf else None
    feat = run_feature_audit(part, features, config) if want_features else None
    report = assemble_report(perf, feat, build_provenance(config, part, inputs))
    rd = report_to_dict(report)

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report_to_json(report), encoding="utf-8")
    (out_dir / "report.md").write_text(report_mod.to_markdown(rd), encoding="utf-8")
    tables = report_mod.emit_tables(rd, out_dir / "tables")
    figures = report_mod.render_report_figures(rd, out_dir / "figures")
    if args.save_scores and feat is not None:
        save_features_binary(feat.score_matrix(), out_dir / "scores.featmat",
                             out_dir / "scores.featmat.ids")
    _diag("info", "done",
          f"report.json, report.md, {len(tables)} tables, {len(figures)} figures -> {out_dir}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.spec:
        spec = load_spec(args.spec)
        if args.no_features:
            spec = type(spec)(groups=spec.groups, features=None, seed=spec.seed)
    else:
        spec = default_cohort_spec(with_features=not args.no_features)
    if args.seed is not None:
        spec = type(spec)(groups=spec.groups, features=spec.features, seed=args.seed)
    elif not args.spec:
        spec = type(spec)(groups=spec.groups, features=spec.features, seed=_resolve_seed(None))
    records, features = generate_cohort(spec)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_cohort_csv(records, out_dir / "cohort.csv")
    (out_dir / "spec.json").write_text(spec_to_json(spec) + "\n", encoding="utf-8")
    msg = f"{len(records)} subjects -> {out_dir / 'cohort.csv'}"
    if features is not None:
        save_features_binary(features, out_dir / "features.featmat",
                             out_dir / "features.featmat.ids")
        msg += f", features {features.X.shape[0]}x{features.X.shape[1]}"
    _diag("info", "done", msg)
    return 0


def calibrate(
    trials: int,
    alpha: float = 0.05,
    seed: int = 0,
    sample_size: int = 126,
    dim: int = 8,
    modes: int = 4,
    error_sd: float = 2.0,
) -> dict:
    """Null-cohort Monte Carlo: per-test rejection rates with 95% Wilson CIs.

    Null cohorts have six equal subgroups with one shared error law and
    pure-noise features, so every test's rejection rate should sit near
    ``alpha``.
    """
    if trials < 100:
        raise ConfigError(f"calibrate needs trials >= 100, got {trials}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    counts: dict[str, int] = {"kruskal_wallis": 0, "levene": 0}
    bracketing = AgeBracketing(edges=_DEFAULTS.bracket_edges)

    for t in range(trials):
        spec = null_cohort_spec(
            n_per_group=sample_size,
            seed=derive_seed(seed, t),
            dim=dim,
            error_sd=error_sd,
            age_loading_scale=0.0,
        )
        records, features = generate_cohort(spec)
        part = partition(records)
        err_groups = [
            np.array([absolute_error(r) for r in group]) for _, group in part.iter_groups()
        ]
        if hyptest.kruskal_wallis(err_groups).p_value < alpha:
            counts["kruskal_wallis"] += 1
        if hyptest.levene(err_groups, centering=_DEFAULTS.levene_centering).p_value < alpha:
            counts["levene"] += 1

        cfg = AuditConfig(seed=derive_seed(seed ^ 0x5A5A, t), modes=modes,
                          grid_points=2, alpha=alpha)
        feat = run_feature_audit(part, features, cfg)
        for row in feat.shift_all.rows:
            if row.result is None:
                continue
            key = f"ks mode={row.mode} {row.comparison}"
            counts.setdefault(key, 0)
            if row.result.p_value < alpha:
                counts[key] += 1

    def wilson(k: int, n: int) -> tuple[float, float]:
        z = 1.959963984540054
        phat = k / n
        denom = 1.0 + z * z / n
        center = (phat + z * z / (2 * n)) / denom
        half = z * ((phat * (1 - phat) / n + z * z / (4 * n * n)) ** 0.5) / denom
        return max(0.0, center - half), min(1.0, center + half)

    results = {}
    for name in sorted(counts):
        k = counts[name]
        lo, hi = wilson(k, trials)
        results[name] = {"rejections": k, "trials": trials, "rate": k / trials,
                         "ci95": [lo, hi]}
    return {"alpha": alpha, "trials": trials, "seed": seed,
            "sample_size": sample_size, "dim": dim, "tests": results}


def _cmd_calibrate(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    summary = calibrate(
        trials=args.trials,
        alpha=args.alpha,
        seed=seed,
        sample_size=args.sample_size,
        dim=args.dim,
        modes=args.modes,
        error_sd=args.error_sd,
    )
    for name, res in summary["tests"].items():
        print(f'test="{name}" rejections={res["rejections"]} trials={res["trials"]} '
              f'rate={res["rate"]:.4f} ci95=[{res["ci95"][0]:.4f},{res["ci95"][1]:.4f}]')
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "calibration.json").write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    path = Path(args.report)
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    try:
        rd = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid report JSON: {exc}") from None
    out_dir = Path(args.out)
    figures = report_mod.render_report_figures(rd, out_dir / "figures")
    tables = report_mod.emit_tables(rd, out_dir / "tables")
    (out_dir / "report.md").write_text(report_mod.to_markdown(rd), encoding="utf-8")
    _diag("info", "done", f"{len(figures)} figures, {len(tables)} tables -> {out_dir}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its message; translate usage errors to code 1
        code = exc.code if isinstance(exc.code, int) else 0
        return 1 if code not in (0, None) else 0
    try:
        if args.command == "audit":
            return _cmd_audit(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        if args.command == "plot":
            return _cmd_plot(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except AuditError as exc:
        code_name = {1: "config", 2: "data", 3: "degenerate"}.get(exc.exit_code, "error")
        _diag("error", code_name, str(exc))
        return exc.exit_code
    except OSError as exc:
        _diag("error", "io", str(exc))
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
