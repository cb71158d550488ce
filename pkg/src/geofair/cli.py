"""geofair command-line interface.

Subcommands: synth, summarize, split, train, audit, report, selftest.
Every subcommand is a pure function of its input files, configuration and
seed; rerunning a command reproduces its outputs byte for byte. Seeds are
always explicit (never wall clock). Diagnostics go to stderr, data to files
or stdout.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
error.

A plain-text config file (`key = value`, '#' comments) can provide defaults
for any long option; command-line flags override config entries.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__, backends
from .audit import DEFAULT_TARGETS, AuditMatrix, AuditReport, audit_matrix
from .data import ingest_csv, summarize, write_csv
from .errors import GeofairError
from .forest import ForestParams
from .models import (FeatureRecipe, default_grid, fit_ols, fit_rf,
                     grid_search, load_model, save_model)
from .selftest import run_selftest
from .splitting import (DEFAULT_THRESHOLD, load_split, save_split,
                        spatial_folds, spatial_split)
from .synth import SynthConfig, generate

logger = logging.getLogger("geofair")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

TARGET_ALIASES = {"poverty": "poverty_rate", "poverty_rate": "poverty_rate",
                  "electricity": "electricity"}
TARGET_SHORT = {"poverty_rate": "poverty", "electricity": "electricity"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path) -> dict:
    """Parse a `key = value` config file; '#' starts a comment."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise GeofairError(f"{path}:{lineno}: expected 'key = value'")
            entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _merged(args, name, conv, default=None, required=False):
    """Flag value if given, else config entry, else default."""
    val = getattr(args, name, None)
    if val is None and args.config_entries and name in args.config_entries:
        val = args.config_entries[name]
    if val is None:
        if required:
            raise UsageError(f"--{name.replace('_', '-')} is required "
                             "(flag or config entry)")
        return default
    return conv(val)


def _parse_max_depth(text):
    if isinstance(text, int) or text is None:
        return text
    if str(text).lower() in ("none", "inf", "unlimited"):
        return None
    return int(text)


def build_parser() -> Parser:
    parser = Parser(prog="geofair", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version",
                        version=f"geofair {__version__} (backend: {backends.BACKEND})")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallelism cap for tree fitting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic village CSV")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-states", dest="n_states", type=int)
    p.add_argument("--n-villages", dest="n_villages", type=int)
    p.add_argument("--delta-st", dest="delta_st", type=float)
    p.add_argument("--delta-sc", dest="delta_sc", type=float)
    p.add_argument("--noise-sd", dest="noise_sd", type=float)
    p.add_argument("--out", required=True)

    p = sub.add_parser("summarize", help="summary statistics of a village CSV")
    p.add_argument("--config")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--strict", action="store_true",
                   help="abort on the first invalid row")

    p = sub.add_parser("split", help="spatial train/test split plus CV folds")
    p.add_argument("--config")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="number of CV folds (default 3)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit a model on the training states")
    p.add_argument("--config")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--split", required=True, help="split JSON from `geofair split`")
    p.add_argument("--model", required=True, choices=["ols", "rf"])
    p.add_argument("--target", required=True, choices=sorted(TARGET_ALIASES))
    p.add_argument("--features", default="ntl+coords", choices=["ntl", "ntl+coords"])
    p.add_argument("--seed", type=int)
    p.add_argument("--n-estimators", dest="n_estimators", type=int)
    p.add_argument("--max-depth", dest="max_depth")
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--grid", action="store_true",
                   help="tune rf hyperparameters by spatial CV grid search")
    p.add_argument("--out", required=True)

    p = sub.add_parser("audit", help="counterfactual fairness audit on test states")
    p.add_argument("--config")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--models", required=True,
                   help="directory holding {ols,rf}_{poverty,electricity}.json")
    p.add_argument("--communities", default="st,sc")
    p.add_argument("--targets", default="poverty,electricity")
    p.add_argument("--metric", default="euclidean",
                   choices=["euclidean", "mahalanobis"])
    p.add_argument("--unsafe-in-sample", action="store_true",
                   help="audit every state, including training states")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="re-render report.txt from a report.csv")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="output text file (default: stdout)")

    sub.add_parser("selftest", help="run the built-in brute-force oracle suite")

    return parser


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = SynthConfig(
        seed=_merged(args, "seed", int, required=True),
        n_states=_merged(args, "n_states", int, default=30),
        n_villages=_merged(args, "n_villages", int, default=50_000),
        delta_st=_merged(args, "delta_st", float, default=0.0),
        delta_sc=_merged(args, "delta_sc", float, default=0.0),
        noise_sd=_merged(args, "noise_sd", float, default=0.5),
    )
    ds = generate(cfg)
    write_csv(ds, args.out)
    logger.info("wrote %d villages to %s", len(ds), args.out)
    return EXIT_OK


def cmd_summarize(args) -> int:
    ds = ingest_csv(args.infile, strict=args.strict)
    if ds.diagnostics and ds.diagnostics.rows_dropped:
        logger.warning("dropped %d invalid rows", ds.diagnostics.rows_dropped)
    text = summarize(ds).to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_split(args) -> int:
    ds = ingest_csv(args.infile)
    seed = _merged(args, "seed", int, required=True)
    threshold = _merged(args, "threshold", float, default=DEFAULT_THRESHOLD)
    k = _merged(args, "k", int, default=3)
    split = spatial_split(ds, threshold=threshold, seed=seed)
    folds = spatial_folds(ds, split, k=k, seed=seed)
    save_split(split, args.out, folds)
    logger.info("train %d states (%.1f%% of population, %.1f%% of villages), "
                "test %d states", len(split.train_states),
                100 * split.achieved_train_pop_frac,
                100 * split.achieved_train_village_frac, len(split.test_states))
    return EXIT_OK


def cmd_train(args) -> int:
    ds = ingest_csv(args.infile)
    split, folds = load_split(args.split)
    train_ds = ds.restrict_states(split.train_states)
    recipe = FeatureRecipe(use_ntl=True, use_coords=(args.features == "ntl+coords"))
    target = TARGET_ALIASES[args.target]

    if args.model == "ols":
        model = fit_ols(train_ds, recipe, target)
    else:
        seed = _merged(args, "seed", int, required=True)
        params = ForestParams(
            n_estimators=_merged(args, "n_estimators", int,
                                 default=ForestParams.n_estimators),
            max_depth=_merged(args, "max_depth", _parse_max_depth,
                              default=ForestParams.max_depth),
            min_samples_leaf=_merged(args, "min_samples_leaf", int,
                                     default=ForestParams.min_samples_leaf),
        )
        if args.grid:
            if folds is None:
                raise GeofairError("--grid needs fold assignments in the "
                                   "split JSON (rerun `geofair split`)")
            result = grid_search(train_ds, folds, recipe, target,
                                 grid=default_grid(), seed=seed)
            params = result.best
            logger.info("grid search selected %s", params)
        model = fit_rf(train_ds, recipe, target, params, seed=seed,
                       n_jobs=args.jobs)
    save_model(model, args.out)
    logger.info("wrote %s model for %s to %s", args.model, target, args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    communities = tuple(c.strip().upper() for c in args.communities.split(","))
    for c in communities:
        if c not in ("SC", "ST"):
            raise UsageError(f"unknown community {c!r} (use sc and/or st)")
    try:
        targets = tuple(TARGET_ALIASES[t.strip()] for t in args.targets.split(","))
    except KeyError as exc:
        raise UsageError(f"unknown target {exc.args[0]!r}") from None
    ds = ingest_csv(args.infile)
    split, _ = load_split(args.split)

    models = {}
    for kind in ("ols", "rf"):
        for target in targets:
            path = os.path.join(args.models,
                                f"{kind}_{TARGET_SHORT[target]}.json")
            if not os.path.exists(path):
                raise GeofairError(f"missing model file {path}")
            models[(kind, target)] = load_model(path)

    if args.unsafe_in_sample:
        logger.warning("--unsafe-in-sample: auditing every state, including "
                       "the models' training states")
        audit_ds = ds
    else:
        audit_ds = ds.restrict_states(split.test_states)

    matrix = audit_matrix(audit_ds, models, communities=communities,
                          targets=targets, metric=args.metric,
                          allow_in_sample=args.unsafe_in_sample)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "report.csv")
    txt_path = os.path.join(args.out, "report.txt")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(matrix.to_csv())
    text = matrix.to_text()
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    logger.info("wrote %s and %s", csv_path, txt_path)
    return EXIT_OK


def _matrix_from_csv(path) -> AuditMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    from .audit import REPORT_CSV_HEADER
    if not lines or lines[0] != REPORT_CSV_HEADER:
        raise GeofairError(f"{path} is not a geofair report.csv")
    reports = []
    for ln in lines[1:]:
        panel, community, target, mean_diff, t_abs, p_t, u, p_u, n_pairs = ln.split(",")
        diff = float(mean_diff)
        reports.append(AuditReport(
            panel=panel, community=community, target=target,
            mean_residual_diff=diff, t_abs=float(t_abs),
            t_sign="+" if diff > 0 else "-" if diff < 0 else "0",
            t_df=0.0, p_t=float(p_t), u_statistic=float(u), p_u=float(p_u),
            n_pairs=int(n_pairs), n_treatment=int(n_pairs),
            n_control_pool=0, n_control_unique=0, distance_p50=0.0,
            distance_p90=0.0, distance_max=0.0, control_reuse_max=0))
    return AuditMatrix(reports=tuple(reports))


def cmd_report(args) -> int:
    text = _matrix_from_csv(args.infile).to_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest()
    all_ok = True
    for name, ok, detail in results:
        print(f"selftest {name}: {'ok' if ok else 'FAIL'} ({detail})")
        all_ok &= ok
    print(f"backend: {backends.BACKEND}")
    return EXIT_OK if all_ok else EXIT_DATA


COMMANDS = {
    "synth": cmd_synth,
    "summarize": cmd_summarize,
    "split": cmd_split,
    "train": cmd_train,
    "audit": cmd_audit,
    "report": cmd_report,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"geofair: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help/--version
        return int(exc.code or 0)

    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    args.config_entries = None
    config_path = getattr(args, "config", None)
    try:
        if config_path:
            args.config_entries = read_config(config_path)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"geofair: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeofairError, FileNotFoundError) as exc:
        print(f"geofair: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:  # pragma: no cover - defensive
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
