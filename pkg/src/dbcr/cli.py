"""Command-line front end: ``dbcr index|query|evaluate|describe|info``."""

from __future__ import annotations

import argparse
import configparser
import datetime as dt
import json
import os
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ComparabilityError, DbcrError
from .evaluation import EvalConfig, label_sort_key, metric_comparison, run_benchmark
from .hog import HogParams
from .index import FeatureIndex, load_index, save_index
from .pipeline import DescriptorConfig, describe_path, feature_dim
from .retrieval import LAYOUTS, METRICS, ingest, knn
from .texture import DbcParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_COMPARABILITY = 4



# -- configuration -------------------------------------------------------------

def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def read_config_file(path) -> tuple[DescriptorConfig, dict]:
    """Parse an INI-style config file.

    Sections ``[descriptor]``, ``[dbc]``, ``[hog]`` describe the pipeline;
    ``[eval]`` holds benchmark defaults, returned as a plain dict.
    """
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    known = {"descriptor", "dbc", "hog", "eval"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")

    d = parser["descriptor"] if parser.has_section("descriptor") else {}
    dbc = parser["dbc"] if parser.has_section("dbc") else {}
    hog = parser["hog"] if parser.has_section("hog") else {}

    dbc_kwargs = {}
    if "distance" in dbc:
        dbc_kwargs["distance"] = int(dbc["distance"])
    if "directions" in dbc:
        dbc_kwargs["directions"] = tuple(int(a) for a in dbc["directions"].replace(",", " ").split())

    casts = {"cell_size": int, "block_size": int, "block_stride": int, "bin_count": int,
             "signed": _bool, "norm": str, "epsilon": float}
    hog_kwargs = {}
    for key, value in hog.items():
        if key not in casts:
            raise ValueError(f"unknown [hog] key {key!r}")
        hog_kwargs[key] = casts[key](value)

    desc_kwargs = {}
    for key, value in d.items():
        if key in ("width", "height"):
            desc_kwargs[key] = int(value)
        elif key in ("original_mode", "wavelet_norm", "fusion"):
            desc_kwargs[key] = value.strip()
        else:
            raise ValueError(f"unknown [descriptor] key {key!r}")

    config = DescriptorConfig(dbc=DbcParams(**dbc_kwargs), hog=HogParams(**hog_kwargs), **desc_kwargs)
    eval_section = dict(parser["eval"]) if parser.has_section("eval") else {}
    return config, eval_section


def manifest_path(path) -> Path:
    return Path(f"{path}.manifest.json")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path, argv, config: DescriptorConfig | None, fingerprint: bytes,
                   started: str, eval_config=None, extra=None) -> None:
    data = {
        "command_line": list(argv),
        "tool_version": __version__,
        "fingerprint": fingerprint.hex(),
        "descriptor_config": config.to_dict() if config is not None else None,
        "eval_config": eval_config,
        "started": started,
        "finished": _now(),
    }
    if extra:
        data.update(extra)
    with open(manifest_path(path), "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_from_manifest(index_path) -> DescriptorConfig | None:
    mp = manifest_path(index_path)
    if not mp.exists():
        return None
    with open(mp, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("descriptor_config") is None:
        return None
    return DescriptorConfig.from_dict(data["descriptor_config"])


def _apply_overrides(config: DescriptorConfig, args) -> DescriptorConfig:
    if getattr(args, "size", None):
        w, h = args.size
        config = DescriptorConfig(w, h, config.dbc, config.hog, config.original_mode,
                                  config.wavelet_norm, config.fusion)
    if getattr(args, "original_mode", None):
        config = DescriptorConfig(config.width, config.height, config.dbc, config.hog,
                                  args.original_mode, config.wavelet_norm, config.fusion)
    return config


def _resolve_config(args, index_path=None) -> tuple[DescriptorConfig, dict]:
    if args.config:
        config, eval_defaults = read_config_file(args.config)
    else:
        config = (_config_from_manifest(index_path) if index_path else None) or DescriptorConfig()
        eval_defaults = {}
    return _apply_overrides(config, args), eval_defaults


def _threads(args) -> int:
    if args.threads:
        return max(1, args.threads)
    env = os.environ.get("DBCR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# -- commands ------------------------------------------------------------------

def cmd_index(args, out=sys.stdout, err=sys.stderr) -> int:
    started = _now()
    config, _ = _resolve_config(args)
    items = ingest(args.dataset, args.layout)
    if not items:
        print(f"error: no images found under {args.dataset}", file=err)
        return EXIT_DATA

    def work(item):
        path, _label = item
        try:
            return describe_path(path, config), None
        except (DbcrError, OSError, ValueError) as exc:
            return None, f"{path}: {exc}"

    with ThreadPoolExecutor(max_workers=_threads(args)) as pool:
        described = list(pool.map(work, items))

    failures = [msg for _, msg in described if msg]
    if failures:
        for msg in failures:
            print(f"failed: {msg}", file=err)
        if not args.skip_errors:
            print(f"error: {len(failures)} file(s) failed; no index written "
                  "(use --skip-errors for a partial index)", file=err)
            return EXIT_DATA

    index = FeatureIndex(config.fingerprint, feature_dim(config))
    for entry_id, ((path, label), (vector, msg)) in enumerate(zip(items, described)):
        if vector is not None:
            index.add(entry_id, path, label, vector)
    save_index(index, args.out)

    counts = Counter(index.labels)
    write_manifest(args.out, args.argv, config, config.fingerprint, started,
                   extra={"class_counts": dict(counts), "failures": failures})
    print(f"indexed {len(index)} images, dim {index.dim}, fingerprint {config.fingerprint.hex()}", file=out)
    for label in sorted(counts, key=label_sort_key):
        print(f"  {label}: {counts[label]}", file=out)
    return EXIT_OK


def cmd_query(args, out=sys.stdout, err=sys.stderr) -> int:
    index = load_index(args.index)
    config, _ = _resolve_config(args, args.index)
    if config.fingerprint != index.fingerprint:
        print("error: descriptor configuration does not match the index\n"
              f"  query fingerprint: {config.fingerprint.hex()}\n"
              f"  index fingerprint: {index.fingerprint.hex()}", file=err)
        return EXIT_COMPARABILITY
    vector = describe_path(args.image, config)
    ranked = knn(vector, index, args.k, args.metric)
    position = {i: n for n, i in enumerate(index.ids)}
    rows = []
    for r, (entry_id, dist) in enumerate(ranked, start=1):
        pos = position[entry_id]
        rows.append({"rank": r, "id": entry_id, "label": index.labels[pos],
                     "path": index.paths[pos], "distance": dist})
    if args.json:
        json.dump({"query": str(args.image), "metric": args.metric, "k": args.k,
                   "fingerprint": index.fingerprint.hex(), "results": rows}, out, indent=2)
        out.write("\n")
    else:
        for row in rows:
            print(f"{row['rank']:>4}  {row['id']:>6}  {row['label']:<12}  "
                  f"{row['distance']:.6g}  {row['path']}", file=out)
    return EXIT_OK


def _eval_config(args, defaults: dict, metric: str) -> EvalConfig:
    k = args.k if args.k is not None else int(defaults.get("k", 20))
    window = args.window if args.window is not None else int(defaults.get("rank_window", 100))
    include_self = (not args.exclude_self) and _bool(defaults.get("include_self", "true"))
    return EvalConfig(k=k, metric=metric, rank_window=window, include_self=include_self)


def _write_report(report, prefix: str) -> None:
    with open(f"{prefix}.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    with open(f"{prefix}.txt", "w", encoding="utf-8") as fh:
        fh.write(report.render_text())
    with open(f"{prefix}.queries.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# fingerprint {report.fingerprint}\n")
        fh.write(report.queries_csv())


def cmd_evaluate(args, out=sys.stdout, err=sys.stderr) -> int:
    started = _now()
    index = load_index(args.index)
    if len(index) == 0:
        print("error: index is empty", file=err)
        return EXIT_DATA
    defaults = read_config_file(args.config)[1] if args.config else {}
    default_metric = args.metric or defaults.get("metric", "l2")
    metrics = list(METRICS) if args.all_metrics else [default_metric]
    reports = []
    for metric in metrics:
        report = run_benchmark(index, _eval_config(args, defaults, metric))
        reports.append(report)
        if args.report:
            prefix = f"{args.report}.{report.config.metric}" if args.all_metrics else args.report
            _write_report(report, prefix)
        if not args.all_metrics:
            out.write(report.render_text())

    if args.all_metrics:
        table = metric_comparison(reports)
        out.write(table)
        if args.report:
            with open(f"{args.report}.metrics.txt", "w", encoding="utf-8") as fh:
                fh.write(f"fingerprint: {index.fingerprint.hex()}\n")
                fh.write(table)
    if args.report:
        write_manifest(args.report, args.argv, _config_from_manifest(args.index), index.fingerprint,
                       started, eval_config=[r.to_dict()["config"] for r in reports],
                       extra={"index": str(args.index)})
    return EXIT_OK


def cmd_describe(args, out=sys.stdout, err=sys.stderr) -> int:
    config, _ = _resolve_config(args)
    vector = describe_path(args.image, config)
    if args.out and str(args.out).endswith(".npy"):
        np.save(args.out, vector.values)
    elif args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(f"# fingerprint {vector.fingerprint.hex()} dim {vector.dim}\n")
            fh.writelines(f"{v!r}\n" for v in vector.values.tolist())
    print(f"dim {vector.dim}  fingerprint {vector.fingerprint.hex()}", file=out)
    if not args.out:
        print(" ".join(f"{v:.6g}" for v in vector.values), file=out)
    return EXIT_OK


def cmd_info(args, out=sys.stdout, err=sys.stderr) -> int:
    index = load_index(args.index)
    print("format: DBCR v1", file=out)
    print(f"fingerprint: {index.fingerprint.hex()}", file=out)
    print(f"dim: {index.dim}", file=out)
    print(f"entries: {len(index)}", file=out)
    counts = Counter(index.labels)
    for label in sorted(counts, key=label_sort_key):
        print(f"  {label}: {counts[label]}", file=out)
    config = _config_from_manifest(args.index)
    if config is not None:
        status = "matches" if config.fingerprint == index.fingerprint else "DOES NOT MATCH"
        print(f"config ({status} index): {json.dumps(config.to_dict(), sort_keys=True)}", file=out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 256x256, got {text!r}") from None
    return w, h


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbcr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dbcr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def descriptor_flags(p):
        p.add_argument("--config", help="INI config file ([descriptor], [dbc], [hog], [eval])")
        p.add_argument("--size", type=_size, help="canonical size WxH (overrides config)")
        p.add_argument("--original-mode", choices=["grayscale", "per-channel"])

    p = sub.add_parser("index", help="describe a dataset and write an index")
    p.add_argument("dataset")
    p.add_argument("--layout", choices=LAYOUTS, default="classdirs")
    p.add_argument("--out", default="index.dbcr")
    p.add_argument("--skip-errors", action="store_true")
    p.add_argument("--threads", type=int)
    descriptor_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="rank indexed images against a query image")
    p.add_argument("image")
    p.add_argument("--index", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--metric", choices=METRICS, default="l2")
    p.add_argument("--json", action="store_true")
    descriptor_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="run the precision/recall benchmark on an index")
    p.add_argument("index")
    p.add_argument("--k", type=int)
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--window", type=int, help="rank window for per-query average precision")
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--all-metrics", action="store_true")
    p.add_argument("--report", help="output prefix for .json/.txt/.queries.csv")
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("describe", help="compute one image's feature vector")
    p.add_argument("image")
    p.add_argument("--out")
    descriptor_flags(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("info", help="print an index header")
    p.add_argument("index")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    args.argv = ["dbcr"] + argv
    try:
        return args.func(args, out=out, err=err)
    except ComparabilityError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_COMPARABILITY
    except (DbcrError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
