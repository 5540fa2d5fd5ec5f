"""Command-line entry point: ``cefr-fcm <command> [options]``.

Exit codes: 0 success, 1 usage, 2 input/schema error, 3 numerical infeasibility.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from cefr_fcm import __version__, kvdoc
from cefr_fcm.baselines import baseline_report
from cefr_fcm.classify import classify_batch, write_records_csv
from cefr_fcm.dataset import DIMENSIONS, TABLE2_CENTROIDS, describe, load_csv, save_dataset, synthesize
from cefr_fcm.errors import InfeasibleError, NoCefrLabelsError, SchemaError
from cefr_fcm.fcm import FcmConfig, fit, grid_search
from cefr_fcm.ordering import load_model, order_clusters, save_model
from cefr_fcm.thresholds import ClassifyThresholds
from cefr_fcm.validation import (
    QUALITY_METRICS,
    cross_validate,
    gap_statistic,
    ordinal_progression_report,
    train_test_report,
)

log = logging.getLogger("cefr_fcm")

SEED_ENV = "CEFR_FCM_SEED"
PCA_ROW_CAP = 10_000

# Descriptive statistics reported for the full public corpus (mean, sd).
REFERENCE_DIMENSION_STATS = {
    "abstraction": (1.47, 1.36),
    "parallelization": (1.75, 1.60),
    "logic": (1.26, 1.60),
    "synchronization": (1.54, 1.42),
    "flow_control": (2.07, 1.22),
    "user_interactivity": (1.55, 0.82),
    "data_representation": (2.10, 1.60),
    "math_operators": (0.76, 1.33),
    "motion_operators": (1.80, 1.62),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _write_manifest(path: Path, command: str, args: argparse.Namespace, inputs: dict, outputs: dict,
                    started: float, extra: dict | None = None) -> None:
    items: list[tuple[str, object]] = [("command", command), ("tool_version", __version__),
                                       ("python", platform.python_version())]
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command"):
            continue
        items.append((f"arg.{key}", value))
    items += [(f"input.{k}", v) for k, v in inputs.items()]
    items += [(f"output.{k}", v) for k, v in outputs.items()]
    for key, value in (extra or {}).items():
        items.append((key, value))
    items.append(("wall_time_s", round(time.perf_counter() - started, 3)))
    kvdoc.write(path, "cefr-fcm/manifest", items)


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


# -- commands ---------------------------------------------------------------


def cmd_fit(args) -> int:
    started = time.perf_counter()
    data = load_csv(args.input)
    config = FcmConfig(k=args.k, m=args.m, epsilon=args.epsilon, max_iter=args.max_iter, seed=args.seed)
    model = order_clusters(fit(data, config))
    out = Path(args.out)
    save_model(model, out)
    for w in model.warnings:
        log.warning("%s", w)
    _write_manifest(_sidecar(out, ".manifest.txt"), "fit", args, {"data": args.input},
                    {"model": str(out)}, started,
                    {"rows": len(data), "iterations_used": model.base.iterations_used,
                     "converged": model.base.converged})
    print(f"fitted k={model.k} in {model.base.iterations_used} iterations -> {out}")
    return 0


def cmd_classify(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    overrides = {k: getattr(args, k) for k in ("tau_clear", "tau_trans", "cert_low", "cert_high")
                 if getattr(args, k) is not None}
    thresholds = model.thresholds
    if overrides:
        thresholds = ClassifyThresholds.unchecked(**(thresholds.to_dict() | overrides))
    data = load_csv(args.input)
    records, summary = classify_batch(model, data, thresholds)
    out = Path(args.out)
    write_records_csv(records, out)
    summary_path = _sidecar(out, ".summary.txt")
    kvdoc.write(summary_path, "cefr-fcm/distribution-summary", summary.to_items())
    hist_path = _sidecar(out, ".histogram.csv")
    edges = summary.histogram_edges
    kvdoc.write_table(hist_path, ["bin_lo", "bin_hi", "count"],
                      [(edges[i], edges[i + 1], c) for i, c in enumerate(summary.score_histogram)])
    _write_manifest(_sidecar(out, ".manifest.txt"), "classify", args,
                    {"model": args.model, "data": args.input},
                    {"records": str(out), "summary": str(summary_path), "histogram": str(hist_path)},
                    started, {f"thresholds.{k}": v for k, v in thresholds.to_dict().items()})
    print(f"classified {len(records)} rows -> {out}")
    return 0


def cmd_validate(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    train = load_csv(args.train)
    test = load_csv(args.test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report = ordinal_progression_report(model, train, all_pairs=args.all_pairs, seed=args.seed)
    kvdoc.write(out / "report_train.txt", "cefr-fcm/validation-report", report.to_items())
    test_report = ordinal_progression_report(model, test, all_pairs=args.all_pairs, seed=args.seed)
    kvdoc.write(out / "report_test.txt", "cefr-fcm/validation-report", test_report.to_items())
    kvdoc.write_table(out / "per_dimension.csv", ["dimension", "kendall_tau", "p_tau", "spearman_rho", "p_rho"],
                      report.dimension_rows())

    tt = train_test_report(model, train, test, seed=args.seed)
    kvdoc.write_table(out / "train_test.csv", ["metric", "train", "test", "delta", "delta_pct"], tt.rows())

    cv = cross_validate(train, args.folds, model.base.config, seed=args.seed)
    cv_rows = [(f"fold{i}", cv.fold_sizes[i], *[q.metric(m) for m in QUALITY_METRICS])
               for i, q in enumerate(cv.folds)]
    cv_rows.append(("mean", sum(cv.fold_sizes), *[cv.mean[m] for m in QUALITY_METRICS]))
    cv_rows.append(("variance", sum(cv.fold_sizes), *[cv.variance[m] for m in QUALITY_METRICS]))
    kvdoc.write_table(out / "cv.csv", ["fold", "n", *QUALITY_METRICS], cv_rows)

    hard = np.argmax(model.memberships(train), axis=1)
    coords = report.pca.coordinates
    rows = np.arange(len(train))
    if len(rows) > PCA_ROW_CAP:
        rows = np.sort(np.random.default_rng(args.seed).choice(len(rows), PCA_ROW_CAP, replace=False))
    names = model.level_names
    kvdoc.write_table(out / "pca.csv", ["row", "pc1", "pc2", "level"],
                      [(int(i), float(coords[i, 0]), float(coords[i, 1]), names[hard[i]]) for i in rows])
    centroids_2d = (model.centroids - report.pca.mean) @ report.pca.components.T
    kvdoc.write_table(out / "pca_centroids.csv", ["level", "pc1", "pc2"],
                      [(names[j], float(c[0]), float(c[1])) for j, c in enumerate(centroids_2d)])

    _write_manifest(out / "manifest.txt", "validate", args,
                    {"model": args.model, "train": args.train, "test": args.test},
                    {"dir": str(out)}, started)
    print(f"validation written to {out}")
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    if args.k_min < 1 or args.k_max < args.k_min:
        raise UsageError("need 1 <= --k-min <= --k-max")
    data = load_csv(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = FcmConfig(k=args.k, m=args.m, epsilon=args.epsilon, max_iter=args.max_iter, seed=args.seed)
    gap = gap_statistic(data, range(args.k_min, args.k_max + 1), B=args.B, seed=args.seed, config=config)
    kvdoc.write_table(out / "gap.csv", ["k", "log_w", "mean_ref_log_w", "gap", "sd", "s_k"],
                      [(g.k, g.log_w, g.mean_ref_log_w, g.gap, g.sd, g.s_k) for g in gap])
    outputs = {"gap": str(out / "gap.csv")}
    if not args.no_grid:
        grid = grid_search(data, args.m_grid, args.eps_grid, k=args.k, seed=args.seed, max_iter=args.max_iter)
        kvdoc.write_table(out / "grid.csv", ["m", "epsilon", "fpc", "silhouette", "score", "iterations", "selected"],
                          [(c.m, c.epsilon, c.fpc, c.silhouette, c.score, c.iterations_used, c.selected)
                           for c in grid.cells])
        outputs["grid"] = str(out / "grid.csv")
    _write_manifest(out / "manifest.txt", "sweep", args, {"data": args.input}, outputs, started,
                    {"gap.reference": "uniform over per-dimension range"})
    print(f"sweep written to {out}")
    return 0


def cmd_compare(args) -> int:
    started = time.perf_counter()
    data = load_csv(args.input)
    rep = baseline_report(data, seed=args.seed, k=args.k, batch_size=args.batch_size,
                          dbscan_eps=args.eps, dbscan_min_pts=args.min_pts)
    out = Path(args.out)
    header = "".join(f"# {k} = {kvdoc._fmt(v)}\n" for k, v in rep.config.items())
    body = kvdoc.table_csv(["method", "silhouette", "n_clusters", "noise_pct", "apn", "error"], rep.table())
    out.write_text(header + body, encoding="utf-8")
    _write_manifest(_sidecar(out, ".manifest.txt"), "compare", args, {"data": args.input},
                    {"table": str(out)}, started, {f"config.{k}": v for k, v in rep.config.items()})
    if all(r.error for r in rep.rows):
        print("all baseline methods failed", file=sys.stderr)
        return 3
    print(f"comparison written to {out}")
    return 0


def _read_centroids(spec: str) -> np.ndarray:
    if spec == "builtin-table2":
        return np.array(TABLE2_CENTROIDS)
    path = Path(spec)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read centroid file {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no centroid rows")
    missing = [d for d in DIMENSIONS if d not in rows[0]]
    if missing:
        raise SchemaError(f"{path}: missing column {missing[0]!r}")
    try:
        return np.array([[float(r[d]) for d in DIMENSIONS] for r in rows])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed centroid value ({exc})") from exc


def cmd_synth(args) -> int:
    started = time.perf_counter()
    centroids = _read_centroids(args.centroids)
    sample = synthesize(centroids, args.n_per_cluster, args.noise_sd, args.seed)
    out = Path(args.out)
    save_dataset(sample.data, out)
    labels_path = _sidecar(out, ".labels.csv")
    kvdoc.write_table(labels_path, ["label"], [(int(v),) for v in sample.labels])
    _write_manifest(_sidecar(out, ".manifest.txt"), "synth", args, {"centroids": args.centroids},
                    {"data": str(out), "labels": str(labels_path)}, started)
    print(f"synthesized {len(sample.data)} rows -> {out}")
    return 0


def cmd_describe(args) -> int:
    started = time.perf_counter()
    data = load_csv(args.input)
    stats = describe(data)
    rows = []
    for d in DIMENSIONS:
        ref_mean, ref_sd = REFERENCE_DIMENSION_STATS[d]
        s = stats[d]
        rows.append((d, s["mean"], s["sd"], s["q1"], s["median"], s["q3"],
                     ref_mean, ref_sd, s["mean"] - ref_mean, s["sd"] - ref_sd))
    out = Path(args.out)
    kvdoc.write_table(out, ["dimension", "mean", "sd", "q1", "median", "q3",
                            "reference_mean", "reference_sd", "delta_mean", "delta_sd"], rows)
    _write_manifest(_sidecar(out, ".manifest.txt"), "describe", args, {"data": args.input},
                    {"table": str(out)}, started, {"rows": len(data)})
    print(f"descriptive statistics for {len(data)} rows -> {out}")
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cefr-fcm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    seed = _default_seed()

    def fcm_options(p):
        p.add_argument("--k", type=int, default=6)
        p.add_argument("--m", type=float, default=1.5)
        p.add_argument("--epsilon", type=float, default=1e-5)
        p.add_argument("--max-iter", type=int, default=1000)

    p = sub.add_parser("fit", help="fit FCM and order clusters into levels")
    p.add_argument("--input", required=True)
    fcm_options(p)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="classify rows with an ordered model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau-clear", type=float)
    p.add_argument("--tau-trans", type=float)
    p.add_argument("--cert-low", type=float)
    p.add_argument("--cert-high", type=float)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("validate", help="validation report, train/test deltas, CV, PCA")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--all-pairs", action="store_true", help="Mann-Whitney over all level pairs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="gap statistic over k and (m, epsilon) grid search")
    p.add_argument("--input", required=True)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=12)
    p.add_argument("--B", type=int, default=10)
    fcm_options(p)
    p.add_argument("--m-grid", type=_float_list, default=[1.5, 2.0, 2.5])
    p.add_argument("--eps-grid", type=_float_list, default=[1e-3, 1e-4, 1e-5])
    p.add_argument("--no-grid", action="store_true")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="FCM vs mini-batch k-means vs DBSCAN")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--eps", type=float, help="DBSCAN radius (default: median 1-NN distance)")
    p.add_argument("--min-pts", type=int, help="DBSCAN density (default: 2 * dims)")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="synthesize a labelled dataset around centroids")
    p.add_argument("--centroids", default="builtin-table2", help="CSV file or 'builtin-table2'")
    p.add_argument("--n-per-cluster", type=int, default=2000)
    p.add_argument("--noise-sd", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("describe", help="per-dimension statistics against the published corpus values")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_describe)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"cefr-fcm: error: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SchemaError, NoCefrLabelsError) as exc:
        print(f"cefr-fcm: input error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"cefr-fcm: infeasible: {exc}", file=sys.stderr)
        return 3
    except UsageError as exc:
        print(f"cefr-fcm: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"cefr-fcm: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cefr-fcm: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
