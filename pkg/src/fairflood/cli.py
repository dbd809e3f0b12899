"""Command-line pipeline: generate, train, evaluate, rank, compare, ablate.

Every randomized command takes an explicit seed (flag or config file; never
wall clock). JSON outputs embed the seed, a config hash, and a schema
version; CSV outputs are listed with digests in the command's run manifest.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import priority as pr
from .errors import DataError, FairfloodError, NumericError, UsageError
from .fairness import improvement_pct
from .model import VARIANT_BASELINE, VARIANT_FAIR, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, evaluate, train

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_LAMBDAS = (0.0, 0.5, 1.0, 2.0)
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def config_hash(payload):
    """Short stable digest of a JSON-serializable configuration."""
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def read_config_file(path):
    """Flat ``key = value`` pairs; '#' starts a comment, blank lines are
    ignored. Values stay strings; commands coerce what they use."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated number list: {text!r}") from exc


def _parse_int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated integer list: {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns exit codes."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _json_dump(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=False)


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_run_manifest(out_dir, command, seed, cfg_payload, files):
    manifest = {
        "kind": "run-manifest",
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "config_hash": config_hash(cfg_payload),
        "config": cfg_payload,
        "files": {str(Path(f).name): _file_digest(f) for f in files},
    }
    path = Path(out_dir) / f"{command}_manifest.json"
    _json_dump(manifest, path)
    return path


# ---------------------------------------------------------------------------
# Shared pipeline pieces (also used directly by the test suite)

def synthetic_config_from_options(opts, seed):
    cfg = ds.SyntheticConfig(seed=seed)
    if opts.get("n_upazilas") is not None:
        cfg.n_upazilas = int(opts["n_upazilas"])
    if opts.get("n_districts") is not None:
        cfg.n_districts = int(opts["n_districts"])
    if opts.get("haor_fraction") is not None:
        cfg.haor_fraction = float(opts["haor_fraction"])
    if opts.get("bias_strength") is not None:
        cfg.district_bias_strength = float(opts["bias_strength"])
    if opts.get("noise_sd") is not None:
        cfg.noise_sd = float(opts["noise_sd"])
    return cfg


def prepare_split(dataset, seed, train_fraction=0.8):
    """Split, then fit standardization on the training rows only and share
    the parameters with the test split."""
    train_set, test_set = ds.stratified_split(dataset, train_fraction, seed)
    params = ds.fit_standardization(train_set)
    train_set.standardization = params
    test_set.standardization = params
    return train_set, test_set


def run_variant(dataset, train_config):
    """Split / standardize / train; returns (model, log, train, test)."""
    train_set, test_set = prepare_split(dataset, train_config.seed)
    model, log = train(train_set, train_config)
    return model, log, train_set, test_set


@dataclasses.dataclass
class SeedRun:
    """One seed of the fair-versus-baseline synthetic-bias experiment."""

    seed: int
    dataset: object
    fair_model: object
    baseline_model: object
    fair_log: object
    baseline_log: object
    fair_eval_full: object
    baseline_eval_full: object
    fair_eval_test: object
    baseline_eval_test: object
    fair_ranking: list
    baseline_ranking: list
    shift_report: object


def run_seed_experiment(seed, lam=1.0, epochs=100, synth_config=None):
    """Generate a biased synthetic dataset and train both variants on it.

    Fairness comparisons use the full dataset (the 17-row test split is too
    small for stable district means); rankings cover the full dataset with
    a shared vulnerability context.
    """
    cfg = synth_config or ds.SyntheticConfig(seed=seed)
    data = ds.generate_synthetic(cfg)
    poverty = {r.upazila_id: r.poverty_rate for r in data.records}

    results = {}
    for variant in (VARIANT_FAIR, VARIANT_BASELINE):
        tc = TrainConfig(seed=seed, variant=variant, lam=lam, epochs=epochs)
        model, log, _train, test_set = run_variant(data, tc)
        results[variant] = {
            "model": model, "log": log,
            "eval_full": evaluate(model, data),
            "eval_test": evaluate(model, test_set),
            "ranking": pr.build_ranking(data, ds_predictions(model, data)),
        }
    shift = pr.compare_rankings(results[VARIANT_BASELINE]["ranking"],
                                results[VARIANT_FAIR]["ranking"],
                                poverty_by_id=poverty)
    return SeedRun(
        seed=seed, dataset=data,
        fair_model=results[VARIANT_FAIR]["model"],
        baseline_model=results[VARIANT_BASELINE]["model"],
        fair_log=results[VARIANT_FAIR]["log"],
        baseline_log=results[VARIANT_BASELINE]["log"],
        fair_eval_full=results[VARIANT_FAIR]["eval_full"],
        baseline_eval_full=results[VARIANT_BASELINE]["eval_full"],
        fair_eval_test=results[VARIANT_FAIR]["eval_test"],
        baseline_eval_test=results[VARIANT_BASELINE]["eval_test"],
        fair_ranking=results[VARIANT_FAIR]["ranking"],
        baseline_ranking=results[VARIANT_BASELINE]["ranking"],
        shift_report=shift,
    )


def ds_predictions(model, dataset):
    from .model import predict
    return predict(model, dataset)


# ---------------------------------------------------------------------------
# Ablation harness

def _ablation_single(spec):
    """One (lambda, seed) training run; a top-level function so it can run
    in a worker process."""
    lam, seed, dataset_path, synth_opts, epochs, eval_split = spec
    if dataset_path is not None:
        data = ds.load_csv(dataset_path)
    else:
        data = ds.generate_synthetic(
            synthetic_config_from_options(synth_opts or {}, seed))
    tc = TrainConfig(seed=seed, variant=VARIANT_FAIR, lam=lam, epochs=epochs)
    model, _log, train_set, test_set = run_variant(data, tc)
    target = {"full": data, "test": test_set, "train": train_set}[eval_split]
    result = evaluate(model, target)
    return {
        "lambda": lam,
        "seed": seed,
        "r2": result.performance.r2,
        "mae": result.performance.mae,
        "spd": result.fairness.spd,
        "regional_gap": result.fairness.regional_gap,
    }


def run_ablation(lambdas, seeds, dataset_path=None, synth_opts=None,
                 epochs=100, eval_split="full", workers=1):
    """Train per (lambda, seed), aggregate seed means per lambda.

    Runs are independent; with ``workers > 1`` they execute in a process
    pool and are merged by key, giving results identical to sequential
    execution.
    """
    if not lambdas or not seeds:
        raise UsageError("ablation needs at least one lambda and one seed")
    if any(l < 0 for l in lambdas):
        raise UsageError("lambda values must be non-negative")
    specs = [(lam, seed, dataset_path, synth_opts, epochs, eval_split)
             for lam in sorted(set(lambdas)) for seed in seeds]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_ablation_single, specs))
    else:
        runs = [_ablation_single(spec) for spec in specs]
    runs.sort(key=lambda r: (r["lambda"], r["seed"]))

    rows = []
    for lam in sorted(set(lambdas)):
        group = [r for r in runs if r["lambda"] == lam]
        rows.append({
            "lambda": lam,
            "r2": float(np.mean([r["r2"] for r in group])),
            "mae": float(np.mean([r["mae"] for r in group])),
            "spd": float(np.mean([r["spd"] for r in group])),
            "regional_gap": float(np.mean([r["regional_gap"] for r in group])),
        })
    return rows, runs


# ---------------------------------------------------------------------------
# Commands

def _option(args, file_cfg, name, default=None):
    """Command-line flag wins, then config file, then the default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if file_cfg and name in file_cfg:
        return file_cfg[name]
    return default


def _require_seed(args, file_cfg):
    seed = _option(args, file_cfg, "seed")
    if seed is None:
        raise UsageError("an explicit --seed is required (flag or config file)")
    return int(seed)


def cmd_generate(args):
    file_cfg = read_config_file(args.config) if args.config else {}
    seed = _require_seed(args, file_cfg)
    opts = {k: _option(args, file_cfg, k) for k in
            ("n_upazilas", "n_districts", "haor_fraction", "bias_strength",
             "noise_sd")}
    cfg = synthetic_config_from_options(opts, seed)
    data, manifest = ds.generate_with_manifest(cfg)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        ds.write_csv(data, out)
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from exc
    manifest["config_hash"] = config_hash(manifest["config"])
    manifest_path = out.with_suffix(".manifest.json")
    _json_dump(manifest, manifest_path)
    if not args.quiet:
        print(f"wrote {len(data)} rows, {data.n_districts} districts -> {out}")
        print(f"manifest -> {manifest_path}")
    return EXIT_OK


def _train_one_variant(data, variant, args, file_cfg, seed, out_dir, quiet):
    lam = float(_option(args, file_cfg, "lam", 1.0))
    if variant == VARIANT_BASELINE and getattr(args, "lam", None) is not None:
        logger.warning("baseline variant ignores --lambda")
    tc = TrainConfig(
        seed=seed, variant=variant, lam=lam,
        epochs=int(_option(args, file_cfg, "epochs", 100)),
        batch_size=int(_option(args, file_cfg, "batch_size", 32)),
        lr=float(_option(args, file_cfg, "lr", 1e-3)),
        weight_decay=float(_option(args, file_cfg, "weight_decay", 1e-5)),
        scheduler_factor=float(_option(args, file_cfg, "scheduler_factor", 0.5)),
        scheduler_patience=int(_option(args, file_cfg, "scheduler_patience", 10)),
    )
    started = time.perf_counter()
    model, log, train_set, test_set = run_variant(data, tc)
    elapsed = time.perf_counter() - started

    ckpt = out_dir / f"{variant}_checkpoint.json"
    save_checkpoint(model, ckpt)
    log_csv = out_dir / f"{variant}_training_log.csv"
    log_json = out_dir / f"{variant}_training_log.json"
    log.to_csv(log_csv)
    log.to_json(log_json)
    if not quiet:
        print(f"{variant}: {model.param_count} parameters, "
              f"{tc.epochs} epochs in {elapsed:.1f}s, "
              f"final task loss {log.entries[-1].task_loss:.4f} -> {ckpt}")
    return tc, [ckpt, log_csv, log_json], train_set, test_set


def cmd_train(args):
    file_cfg = read_config_file(args.config) if args.config else {}
    seed = _require_seed(args, file_cfg)
    dataset_path = _option(args, file_cfg, "dataset")
    if dataset_path is None:
        raise UsageError("--dataset is required")
    data = ds.load_csv(dataset_path)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variant = _option(args, file_cfg, "variant", VARIANT_FAIR)
    variants = ((VARIANT_FAIR, VARIANT_BASELINE) if variant == "both"
                else (variant,))
    files = []
    last_tc = None
    for v in variants:
        if v not in (VARIANT_FAIR, VARIANT_BASELINE):
            raise UsageError(f"unknown variant {v!r}")
        tc, outputs, train_set, test_set = _train_one_variant(
            data, v, args, file_cfg, seed, out_dir, args.quiet)
        files.extend(outputs)
        last_tc = tc
    split_train = out_dir / "train_split.csv"
    split_test = out_dir / "test_split.csv"
    ds.write_csv(train_set, split_train)
    ds.write_csv(test_set, split_test)
    files.extend([split_train, split_test])
    _write_run_manifest(out_dir, "train", seed,
                        {**last_tc.to_dict(), "dataset": str(dataset_path)},
                        files)
    return EXIT_OK


def cmd_evaluate(args):
    model = load_checkpoint(args.checkpoint)
    data = ds.load_csv(args.dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = evaluate(model, data)
    payload = {
        "kind": "evaluation",
        "schema_version": SCHEMA_VERSION,
        "seed": model.seed,
        "config_hash": config_hash(model.config.to_dict()),
        "variant": model.variant,
        "dataset": str(args.dataset),
        **result.to_dict(),
    }
    eval_path = out_dir / f"{model.variant}_evaluation.json"
    _json_dump(payload, eval_path)

    preds_path = out_dir / f"{model.variant}_predictions.csv"
    with open(preds_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("upazila_id,district,region,actual,predicted\n")
        for rec, pred in zip(data.records, result.predictions):
            fh.write(f"{rec.upazila_id},{rec.district},{rec.region},"
                     f"{rec.damage_usd_m!r},{float(pred)!r}\n")
    mae_path = out_dir / f"{model.variant}_per_district_mae.csv"
    with open(mae_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("district,mae\n")
        for district, mae in result.fairness.per_district_mae.items():
            fh.write(f"{district},{mae!r}\n")

    files = [eval_path, preds_path, mae_path]
    if args.baseline_checkpoint:
        base_model = load_checkpoint(args.baseline_checkpoint)
        base_result = evaluate(base_model, data)
        fair_metrics = {"spd": result.fairness.spd,
                        "prediction_variance": result.fairness.prediction_variance,
                        "regional_gap": result.fairness.regional_gap,
                        "equal_opportunity": result.fairness.equal_opportunity,
                        "mae_std": result.fairness.mae_std_across_districts,
                        "mae": result.performance.mae,
                        "mse": result.performance.mse}
        base_metrics = {"spd": base_result.fairness.spd,
                        "prediction_variance": base_result.fairness.prediction_variance,
                        "regional_gap": base_result.fairness.regional_gap,
                        "equal_opportunity": base_result.fairness.equal_opportunity,
                        "mae_std": base_result.fairness.mae_std_across_districts,
                        "mae": base_result.performance.mae,
                        "mse": base_result.performance.mse}
        comparison = {
            "kind": "comparison",
            "schema_version": SCHEMA_VERSION,
            "seed": model.seed,
            "config_hash": config_hash(model.config.to_dict()),
            "fair": {**fair_metrics, "r2": result.performance.r2},
            "baseline": {**base_metrics, "r2": base_result.performance.r2},
            "improvement_pct": {
                key: (improvement_pct(fair_metrics[key], base_metrics[key])
                      if base_metrics[key] > 0 else None)
                for key in fair_metrics},
        }
        cmp_path = out_dir / "comparison.json"
        _json_dump(comparison, cmp_path)
        files.append(cmp_path)

    _write_run_manifest(out_dir, "evaluate", model.seed,
                        model.config.to_dict(), files)
    if not args.quiet:
        flag = " (leakage warning: evaluated rows include training rows)" \
            if result.leakage else ""
        print(f"{model.variant}: R2={result.performance.r2:.3f} "
              f"MAE={result.performance.mae:.3f} SPD={result.fairness.spd:.3f}"
              f"{flag} -> {eval_path}")
    return EXIT_OK


def _select_split(data, model, which):
    if which == "all":
        return list(range(len(data)))
    if model.train_upazila_ids is None:
        raise DataError("checkpoint has no training row ids; cannot select split")
    train_ids = set(model.train_upazila_ids)
    ids = data.upazila_ids()
    if which == "train":
        return [i for i, uid in enumerate(ids) if uid in train_ids]
    return [i for i, uid in enumerate(ids) if uid not in train_ids]


def cmd_rank(args):
    model = load_checkpoint(args.checkpoint)
    data = ds.load_csv(args.dataset)
    indices = _select_split(data, model, args.split)
    if not indices:
        raise DataError(f"split {args.split!r} selects no rows")
    # vulnerability is normalized over the full file so subset rankings stay
    # comparable across splits
    vuln_all = ds.vulnerability_vector(data)
    subset = data.subset(indices)
    from .model import predict
    preds = predict(model, subset)
    entries = pr.build_ranking(subset, preds, vulnerabilities=vuln_all[indices])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pr.write_ranking_csv(entries, out)
    if not args.quiet:
        print(f"ranked {len(entries)} upazilas ({args.split}) -> {out}")
    return EXIT_OK


def cmd_compare(args):
    reference = pr.read_ranking_csv(args.reference)
    candidate = pr.read_ranking_csv(args.candidate)
    poverty = None
    if args.dataset:
        data = ds.load_csv(args.dataset)
        poverty = {r.upazila_id: r.poverty_rate for r in data.records}
    report = pr.compare_rankings(reference, candidate, poverty_by_id=poverty)
    payload = {
        "kind": "rank-shift",
        "schema_version": SCHEMA_VERSION,
        "reference": str(args.reference),
        "candidate": str(args.candidate),
        **report.to_dict(),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _json_dump(payload, out)
    if not args.quiet:
        haor = ("n/a" if report.mean_shift_haor is None
                else f"{report.mean_shift_haor:+.2f}")
        print(f"{report.pct_reranked:.1f}% reranked "
              f"(>=3 positions: {report.pct_reranked_3plus:.1f}%), "
              f"haor mean shift {haor}, "
              f"score correlation {report.score_correlation:.3f} -> {out}")
    return EXIT_OK


def cmd_ablate(args):
    file_cfg = read_config_file(args.config) if args.config else {}
    lambdas = _parse_float_list(_option(args, file_cfg, "lambdas",
                                        ",".join(map(str, DEFAULT_LAMBDAS))))
    seeds = _parse_int_list(_option(args, file_cfg, "seeds",
                                    ",".join(map(str, DEFAULT_SEEDS))))
    epochs = int(_option(args, file_cfg, "epochs", 100))
    eval_split = _option(args, file_cfg, "eval_split", "full")
    if eval_split not in ("full", "test", "train"):
        raise UsageError(f"unknown eval split {eval_split!r}")
    dataset_path = _option(args, file_cfg, "dataset")
    synth_opts = {k: _option(args, file_cfg, k) for k in
                  ("n_upazilas", "n_districts", "haor_fraction",
                   "bias_strength", "noise_sd")}

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs_csv = out_dir / "ablation_runs.csv"
    rows_csv = out_dir / "ablation.csv"
    try:
        rows, runs = run_ablation(
            lambdas, seeds, dataset_path=dataset_path, synth_opts=synth_opts,
            epochs=epochs, eval_split=eval_split, workers=args.workers)
    finally:
        pass  # partial per-run results are written below on success only

    with open(runs_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("lambda,seed,r2,mae,spd,regional_gap\n")
        for r in runs:
            fh.write(f"{r['lambda']!r},{r['seed']},{r['r2']!r},{r['mae']!r},"
                     f"{r['spd']!r},{r['regional_gap']!r}\n")
    with open(rows_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("lambda,r2,mae,spd,regional_gap\n")
        for row in rows:
            fh.write(f"{row['lambda']!r},{row['r2']!r},{row['mae']!r},"
                     f"{row['spd']!r},{row['regional_gap']!r}\n")
    cfg_payload = {"lambdas": lambdas, "seeds": seeds, "epochs": epochs,
                   "eval_split": eval_split, "dataset": dataset_path,
                   "synthetic": {k: v for k, v in synth_opts.items()
                                 if v is not None}}
    json_path = out_dir / "ablation.json"
    _json_dump({"kind": "ablation", "schema_version": SCHEMA_VERSION,
                "seed": seeds[0], "config_hash": config_hash(cfg_payload),
                "config": cfg_payload, "rows": rows}, json_path)
    _write_run_manifest(out_dir, "ablate", seeds[0], cfg_payload,
                        [runs_csv, rows_csv, json_path])
    if not args.quiet:
        for row in rows:
            print(f"lambda={row['lambda']:<4} r2={row['r2']:.3f} "
                  f"mae={row['mae']:.3f} spd={row['spd']:.3f} "
                  f"rfg={row['regional_gap']:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring

def build_parser():
    parser = _Parser(prog="fairflood",
                     description="Fairness-aware flood aid prioritization pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p):
        p.add_argument("--seed", type=int, default=None,
                       help="explicit RNG seed (required; no wall-clock seeding)")
        p.add_argument("--config", default=None,
                       help="flat key=value config file; flags override it")
        p.add_argument("--quiet", action="store_true")

    g = sub.add_parser("generate", help="write a calibrated synthetic dataset")
    add_shared(g)
    g.add_argument("--out", required=True, help="output CSV path")
    g.add_argument("--n-upazilas", type=int, default=None)
    g.add_argument("--n-districts", type=int, default=None)
    g.add_argument("--haor-fraction", type=float, default=None)
    g.add_argument("--bias-strength", type=float, default=None)
    g.add_argument("--noise-sd", type=float, default=None)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train fair and/or baseline variants")
    add_shared(t)
    t.add_argument("--dataset", default=None, help="input dataset CSV")
    t.add_argument("--out-dir", required=True)
    t.add_argument("--variant", default=None,
                   choices=[VARIANT_FAIR, VARIANT_BASELINE, "both"])
    t.add_argument("--lambda", dest="lam", type=float, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--weight-decay", type=float, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="performance + fairness reports")
    add_shared(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--baseline-checkpoint", default=None,
                   help="also emit a fair-vs-baseline comparison")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("rank", help="write the priority ranking CSV")
    add_shared(r)
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--dataset", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--split", default="all", choices=["all", "train", "test"],
                   help="restrict to the checkpoint's train/test rows")
    r.set_defaults(func=cmd_rank)

    c = sub.add_parser("compare", help="rank-shift report between two rankings")
    add_shared(c)
    c.add_argument("--reference", required=True, help="reference ranking CSV")
    c.add_argument("--candidate", required=True, help="candidate ranking CSV")
    c.add_argument("--out", required=True, help="output JSON path")
    c.add_argument("--dataset", default=None,
                   help="dataset CSV supplying poverty rates for subgroup shifts")
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("ablate", help="lambda ablation over seeds")
    add_shared(a)
    a.add_argument("--dataset", default=None,
                   help="fixed dataset CSV (default: synthetic per seed)")
    a.add_argument("--out-dir", required=True)
    a.add_argument("--lambdas", default=None)
    a.add_argument("--seeds", default=None)
    a.add_argument("--epochs", type=int, default=None)
    a.add_argument("--eval-split", default=None, choices=["full", "test", "train"])
    a.add_argument("--workers", type=int, default=1)
    a.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FairfloodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
