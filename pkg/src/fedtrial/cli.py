"""``fedtrial`` command line: generate, split, run {local,central,federated,sweep}, check-gradients.

Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.
Logging verbosity comes from ``FEDTRIAL_LOG`` (error, info or debug).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from collections import Counter, defaultdict
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .cohort import (
    CLOPIDOGREL_CODES, TF_CODES, annotate_cohort, generate_cohort, stratified_split,
)
from .config import RunConfig, load_config
from .encoding import Vocabulary, build_vocabulary
from .errors import ConfigError, FedTrialError, MetricError
from .federated import derive_seed, run_centralized, run_federated, run_local_scenario
from .nn import FCN, GRU, ArchitectureSpec, finite_difference_check
from .pipeline import build_experiment_data
from .records import (
    EXCLUDED, read_cohort, read_labels, read_split, write_cohort, write_labels, write_split,
)
from .sweep import center_sweep, sweep_table_csv

log = logging.getLogger("fedtrial")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SCENARIOS = ("local", "central", "federated", "sweep")


def git_blob_sha1(path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


def write_manifest(out_dir: Path, command: str, cfg: RunConfig, inputs: dict[str, Path],
                   name: str = "manifest.json", outputs: dict[str, Path] | None = None, **extra):
    """Config echo with seed and content hashes; no timestamps."""
    manifest = {
        "command": command,
        "fedtrial_version": __version__,
        "seed": cfg.seed,
        "config_sha256": config_hash(cfg),
        "config": cfg.to_dict(),
        "inputs": {name: {"path": str(p), "git_blob_sha1": git_blob_sha1(p)} for name, p in sorted(inputs.items())},
        **extra,
    }
    if outputs:
        manifest["outputs"] = {k: git_blob_sha1(p) for k, p in sorted(outputs.items())}
    (out_dir / name).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8", newline="\n")


@contextmanager
def atomic_dir(target: Path):
    """Build into a sibling temp dir, then swap it into place."""
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}-", dir=target.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if target.exists():
        old = Path(tempfile.mkdtemp(prefix=f".{target.name}-old-", dir=target.parent))
        os.replace(target, old / "x")
        shutil.rmtree(old, ignore_errors=True)
    os.replace(tmp, target)


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "centers", None):
        try:
            centers = [int(c) for c in args.centers.split(",") if c.strip()]
        except ValueError:
            raise ConfigError(f"--centers must be a comma-separated list of integers, got {args.centers!r}") from None
        cfg.training.centers = centers
    cfg.validate()
    return cfg


def _require(paths: dict[str, Path]):
    missing = [f"{k}={p}" for k, p in paths.items() if not p.is_file()]
    if missing:
        raise ConfigError(f"missing input file(s): {', '.join(missing)}")


# ---------------------------------------------------------------------------
# commands

def cmd_generate(args) -> int:
    cfg = _load(args)
    data_dir = Path(args.out) if args.out else cfg.path("data_dir")
    records = generate_cohort(cfg.generator_config())
    labels = annotate_cohort(records, TF_CODES, CLOPIDOGREL_CODES)
    data_dir.mkdir(parents=True, exist_ok=True)
    cohort_path = data_dir / cfg.paths.cohort
    labels_path = data_dir / cfg.paths.labels
    write_cohort(cohort_path, records)
    write_labels(labels_path, labels)
    write_manifest(data_dir, "generate", cfg, {}, "generate_manifest.json",
                   {"cohort": cohort_path, "labels": labels_path})
    per_center = defaultdict(Counter)
    for r in records:
        per_center[r.center_id][labels[r.patient_id].label] += 1
    summary = {
        "total": len(records),
        "labels": dict(sorted(Counter(o.label for o in labels.values()).items())),
        "excluded_reasons": dict(sorted(Counter(o.reason for o in labels.values() if o.label == EXCLUDED).items())),
        "centers": {str(c): dict(sorted(per_center[c].items())) for c in sorted(per_center)},
        "cohort": str(cohort_path),
        "labels_file": str(labels_path),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _load(args)
    data_dir = Path(args.out) if args.out else cfg.path("data_dir")
    cohort_path, labels_path = cfg.path("cohort"), cfg.path("labels")
    _require({"cohort": cohort_path, "labels": labels_path})
    records = read_cohort(cohort_path)
    labels = read_labels(labels_path)
    train_ids, test_ids = stratified_split(records, labels, cfg.split.test_fraction, cfg.split_seed)
    by_id = {r.patient_id: r for r in records}
    vocab = build_vocabulary([by_id[p] for p in train_ids], cfg.split.min_count, CLOPIDOGREL_CODES)
    data_dir.mkdir(parents=True, exist_ok=True)
    write_split(data_dir / cfg.paths.split, train_ids, test_ids)
    vocab.to_jsonl(data_dir / cfg.paths.vocab)
    write_manifest(data_dir, "split", cfg, {"cohort": cohort_path, "labels": labels_path},
                   "split_manifest.json",
                   {"split": data_dir / cfg.paths.split, "vocab": data_dir / cfg.paths.vocab})
    test_counts = defaultdict(Counter)
    for pid in test_ids:
        test_counts[by_id[pid].center_id][labels[pid].label] += 1
    print(json.dumps({
        "train": len(train_ids),
        "test": len(test_ids),
        "vocab_size": vocab.size,
        "test_per_center": {str(c): dict(sorted(test_counts[c].items())) for c in sorted(test_counts)},
    }, sort_keys=True))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    inputs = {name: cfg.path(name) for name in ("cohort", "labels", "split", "vocab")}
    _require(inputs)
    records = read_cohort(inputs["cohort"])
    labels = read_labels(inputs["labels"])
    train_ids, test_ids = read_split(inputs["split"])
    vocab = Vocabulary.from_jsonl(inputs["vocab"])
    data = build_experiment_data(records, labels, train_ids, test_ids, vocab, cfg.model.kind,
                                 cfg.model.max_seq_len)
    fed = cfg.federated_config(vocab.size)
    record_time = cfg.run.record_time
    target = (Path(args.out) if args.out else cfg.path("out_dir")) / f"{args.scenario}-{cfg.model.kind.lower()}"
    with atomic_dir(target) as out:
        summary = {"scenario": args.scenario, "kind": cfg.model.kind, "out_dir": str(target)}
        if args.scenario == "central":
            params, series = run_centralized(fed, data.pooled, data.test)
            series.write_csv(out / "metrics.csv", record_time)
            params.save(out / "params.bin")
            summary["final_auc"] = series.final_auc
        elif args.scenario == "federated":
            params, series = run_federated(fed, data.partitions, data.test)
            series.write_csv(out / "metrics.csv", record_time)
            params.save(out / "params.bin")
            summary["final_auc"] = series.final_auc
            summary["centers"] = list(fed.centers or data.partitions)
        elif args.scenario == "local":
            result = run_local_scenario(fed, data.partitions, data.test)
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["center_id", "n_train", "status", "final_auc"])
            for cid, auc in result.items():
                n = len(data.partitions[cid])
                w.writerow([cid, n, "UNTRAINABLE" if auc is None else "OK", "" if auc is None else repr(float(auc))])
            (out / "local_auc.csv").write_text(buf.getvalue(), encoding="utf-8", newline="")
            summary["final_auc"] = {str(c): a for c, a in result.items()}
        else:
            parts = data.partitions
            if fed.centers is not None:
                parts = {c: parts[c] for c in parts if c in fed.centers}
            rows = center_sweep(replace(fed, centers=None), parts, data.test, out, record_time)
            (out / "sweep.csv").write_text(sweep_table_csv(rows), encoding="utf-8", newline="")
            summary["rows"] = len(rows)
            summary["best"] = max(((r.k, r.final_auc) for r in rows), key=lambda kv: kv[1])
        write_manifest(out, f"run {args.scenario}", cfg, inputs, scenario=args.scenario)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_check_gradients(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    report = []
    for kind in (FCN, GRU):
        for i in range(args.n):
            if kind == FCN:
                spec = ArchitectureSpec(FCN, int(rng.integers(2, 11)),
                                        tuple(int(h) for h in rng.integers(1, 7, size=rng.integers(1, 3))),
                                        seed=derive_seed(seed, i))
                batch = [(rng.integers(0, 2, spec.input_dim).astype(float), int(rng.integers(0, 2)))
                         for _ in range(int(rng.integers(1, 9)))]
            else:
                spec = ArchitectureSpec(GRU, int(rng.integers(2, 11)), (int(rng.integers(1, 7)),),
                                        int(rng.integers(1, 5)), seed=derive_seed(seed, i))
                batch = [(rng.integers(0, spec.input_dim, int(rng.integers(0, 8))), int(rng.integers(0, 2)))
                         for _ in range(int(rng.integers(1, 9)))]
            err = finite_difference_check(spec, batch, args.epsilon)
            report.append({"kind": kind, "spec": spec.to_dict(), "max_rel_error": float(err), "ok": bool(err < args.tol)})
    ok = all(r["ok"] for r in report)
    print(json.dumps({"ok": ok, "tolerance": args.tol, "checks": report}, sort_keys=True))
    return EXIT_OK if ok else EXIT_RUNTIME


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedtrial", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, centers=False):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--out", help="override the output directory")
        if centers:
            p.add_argument("--centers", help="comma-separated participating center ids")

    common(sub.add_parser("generate", help="generate a synthetic cohort and its labels"))
    common(sub.add_parser("split", help="stratified train/test split and training vocabulary"))
    run = sub.add_parser("run", help="train and evaluate one scenario")
    run.add_argument("scenario", choices=SCENARIOS)
    common(run, centers=True)
    grad = sub.add_parser("check-gradients", help="finite-difference check on random small models")
    grad.add_argument("--config", help="accepted for symmetry; unused")
    grad.add_argument("--seed", type=int)
    grad.add_argument("--n", type=int, default=20, help="random specs per architecture")
    grad.add_argument("--epsilon", type=float, default=1e-5)
    grad.add_argument("--tol", type=float, default=1e-4)
    return parser


COMMANDS = {"generate": cmd_generate, "split": cmd_split, "run": cmd_run, "check-gradients": cmd_check_gradients}


def main(argv=None) -> int:
    level = os.environ.get("FEDTRIAL_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"fedtrial: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MetricError as exc:
        print(f"fedtrial: metric UNDEFINED: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FedTrialError, OSError, ValueError, KeyError) as exc:
        print(f"fedtrial: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
