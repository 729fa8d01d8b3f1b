"""Command-line entry point.

Subcommands: ``train``, ``sample``, ``eval``, ``importance``, ``schedule``,
``toy``.  Configuration comes from defaults, then an optional flat
``key=value`` config file, then explicit flags, in that order; every command
echoes its effective configuration to stderr before doing work.  Logs go to
stderr, data products to stdout or files.  Exit codes: 0 success, 1 usage
error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import streams
from .boosting import LOGISTIC, SQUARED, MeanEstimatorConfig
from .card_t import sample_card_t, train_card_t
from .data import (
    DataError,
    SplitSpec,
    clf_toy_generate,
    load_csv,
    make_split,
    mcar_mask,
    save_csv,
    toy_generate,
)
from .dbt import BINARY, DbtConfig, REGRESSION, classify, sample_dbt, train_dbt
from .metrics import (
    deferral_report,
    format_mean_std,
    nll,
    paired_t_test,
    piw,
    qice,
    rmse,
)
from .model_io import ModelFormatError, load_model, save_model
from .schedule import build_linear_schedule, coefficient_table
from .tree import TreeParams, gain_importance

_TRAIN_DEFAULTS = {
    "model-kind": "dbt",
    "task": REGRESSION,
    "timesteps": 1000,
    "n-noise": 100,
    "num-leaves": 101,
    "min-samples-leaf": 20,
    "learning-rate": 1.0,
    "beta-start": 1e-4,
    "beta-end": 0.02,
    "prior-mean": "mean_estimator",
    "prototype-epsilon": 0.01,
    "mean-trees": 100,
    "mean-leaves": 31,
    "mean-shrinkage": 0.05,
    "mcar-rate": 0.0,
    "seed": 0,
}


def _read_config_file(path):
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _effective_config(args, extra_keys=()):
    """defaults <- config file <- explicit flags; values kept as strings/nums."""
    cfg = dict(_TRAIN_DEFAULTS)
    for k in extra_keys:
        cfg.setdefault(k, None)
    if getattr(args, "config", None):
        for k, v in _read_config_file(args.config).items():
            if k not in cfg:
                raise DataError(f"unknown config key {k!r}")
            cfg[k] = v
    for k in cfg:
        flag = k.replace("-", "_")
        v = getattr(args, flag, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _echo_config(cmd, cfg):
    body = " ".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    print(f"[{cmd}] config: {body}", file=sys.stderr)


def _build_configs(cfg):
    task = str(cfg["task"])
    loss = LOGISTIC if task == BINARY else SQUARED
    dbt_cfg = DbtConfig(
        T=int(cfg["timesteps"]),
        n_noise=int(cfg["n-noise"]),
        tree_params=TreeParams(
            num_leaves=int(cfg["num-leaves"]),
            min_samples_leaf=int(cfg["min-samples-leaf"]),
            learning_rate=float(cfg["learning-rate"]),
        ),
        beta_start=float(cfg["beta-start"]),
        beta_end=float(cfg["beta-end"]),
        prior_mean_mode=str(cfg["prior-mean"]),
        task=task,
        prototype_epsilon=float(cfg["prototype-epsilon"]),
        seed=int(cfg["seed"]),
    )
    mean_cfg = MeanEstimatorConfig(
        n_trees=int(cfg["mean-trees"]),
        tree_params=TreeParams(num_leaves=int(cfg["mean-leaves"]),
                               min_samples_leaf=int(cfg["min-samples-leaf"])),
        shrinkage=float(cfg["mean-shrinkage"]),
        loss=loss,
    )
    return dbt_cfg, mean_cfg


def _train_one(train_ds, model_kind, dbt_cfg, mean_cfg):
    if model_kind == "card_t":
        return train_card_t(train_ds, dbt_cfg, mean_cfg)
    return train_dbt(train_ds, dbt_cfg, mean_cfg)


def _sample_model(model, rows, s_count, seed):
    rng = streams.stream(seed, streams.DOMAIN_SAMPLING)
    if model.kind == "card_t":
        return sample_card_t(model, rows, s_count, rng)
    return sample_dbt(model, rows, s_count, rng)


def _out_stream(path):
    return open(path, "w") if path else sys.stdout


# ---------------------------------------------------------------------------
# subcommands

def cmd_train(args) -> int:
    cfg = _effective_config(args)
    _echo_config("train", cfg)
    data = load_csv(args.data, response=args.response)
    rate = float(cfg["mcar-rate"])
    if rate > 0:
        data = mcar_mask(data, rate, int(cfg["seed"]))
    dbt_cfg, mean_cfg = _build_configs(cfg)
    model = _train_one(data, str(cfg["model-kind"]), dbt_cfg, mean_cfg)
    for i, mse in enumerate(model.train_log):
        print(f"[train] t={dbt_cfg.T - i} mse={mse:.6g}", file=sys.stderr)
    out = args.out or str(Path(args.out_dir or ".") / "model.dbtm")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"[train] wrote {out}", file=sys.stderr)
    return 0


def cmd_sample(args) -> int:
    cfg = {"model": args.model, "data": args.data, "samples": args.samples,
           "seed": args.seed}
    _echo_config("sample", cfg)
    model = load_model(args.model)
    data = load_csv(args.data, response=args.response)
    out = _sample_model(model, data, args.samples, args.seed)
    fh = _out_stream(args.out)
    try:
        if model.config.task == BINARY:
            fh.write("row,sample,logit,probability\n")
            prob = 1.0 / (1.0 + np.exp(-out))
            for j in range(out.shape[0]):
                for s in range(out.shape[1]):
                    fh.write(f"{j},{s},{float(out[j, s])!r},{float(prob[j, s])!r}\n")
        else:
            fh.write("row,sample,value\n")
            for j in range(out.shape[0]):
                for s in range(out.shape[1]):
                    fh.write(f"{j},{s},{float(out[j, s])!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _eval_regression(truth, samples, bins):
    return {"rmse": rmse(truth, samples), "nll": nll(truth, samples),
            "qice": qice(truth, samples, bins)}


def _eval_classification(model, truth, samples, alphas, threshold):
    thr = threshold if threshold is not None else model.train_positive_rate
    if thr is None or not 0.0 < thr < 1.0:
        thr = 0.5
    labels, probs = classify(samples, threshold=thr)
    tt = {a: paired_t_test(probs, a).reject for a in alphas}
    report = deferral_report(truth.astype(int), labels, piw(samples), tt)
    return report, thr


def _run_fold(packed):
    """Train/evaluate one fold; module-level so process pools can pickle it."""
    (data, spec, model_kind, dbt_cfg, mean_cfg, s_count, seed, bins) = packed
    train_ds, test_ds = make_split(data, spec)
    model = _train_one(train_ds, model_kind, dbt_cfg, mean_cfg)
    samples = _sample_model(model, test_ds, s_count, seed + spec.fold_index)
    return _eval_regression(test_ds.y, samples, bins)


def cmd_eval(args) -> int:
    cfg = _effective_config(args, extra_keys=("samples", "folds", "alpha"))
    cfg["samples"] = args.samples
    cfg["folds"] = args.folds
    cfg["alpha"] = args.alpha
    _echo_config("eval", cfg)
    alphas = args.alpha or [0.05, 0.005]
    bins = args.qice_bins

    if args.folds:
        if args.model:
            raise DataError("--folds retrains per fold; do not pass --model")
        data = load_csv(args.data, response=args.response)
        rate = float(cfg["mcar-rate"])
        if rate > 0:
            data = mcar_mask(data, rate, int(cfg["seed"]))
        dbt_cfg, mean_cfg = _build_configs(cfg)
        if dbt_cfg.task != REGRESSION:
            raise DataError("--folds mode currently evaluates regression metrics")
        s_count = args.samples or 100
        seed = int(cfg["seed"])
        jobs = [(data, SplitSpec(train_fraction=args.train_fraction, fold_seed=seed,
                                 fold_index=i),
                 str(cfg["model-kind"]), dbt_cfg, mean_cfg, s_count, seed, bins)
                for i in range(args.folds)]
        workers = args.threads or None
        if args.folds > 1 and (workers is None or workers > 1):
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_fold, jobs))
        else:
            results = [_run_fold(j) for j in jobs]
        fh = _out_stream(args.out)
        try:
            fh.write("metric,mean,std,folds,summary\n")
            for key in ("rmse", "nll", "qice"):
                vals = np.array([r[key] for r in results])
                std = vals.std(ddof=1) if len(vals) > 1 else float("nan")
                fh.write(f"{key},{float(vals.mean())!r},{float(std)!r},{len(vals)},"
                         f"{format_mean_std(vals)}\n")
        finally:
            if fh is not sys.stdout:
                fh.close()
        return 0

    if not args.model:
        raise DataError("eval needs --model (or --folds for the retraining mode)")
    model = load_model(args.model)
    data = load_csv(args.data, response=args.response)
    s_default = 10 if model.config.task == BINARY else 100
    s_count = args.samples or s_default
    samples = _sample_model(model, data, s_count, args.seed or model.config.seed)
    fh = _out_stream(args.out)
    try:
        if model.config.task == BINARY:
            report, thr = _eval_classification(model, data.y, samples, alphas,
                                               args.threshold)
            print(f"[eval] vote threshold: {thr}", file=sys.stderr)
            if args.csv:
                fh.write(report.to_csv())
            else:
                fh.write(report.to_text() + "\n")
        else:
            vals = _eval_regression(data.y, samples, bins)
            if args.csv:
                fh.write("metric,value\n")
                for k, v in vals.items():
                    fh.write(f"{k},{float(v)!r}\n")
            else:
                for k, v in vals.items():
                    fh.write(f"{k}: {v:.6g}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_importance(args) -> int:
    cfg = {"model": args.model, "timesteps": args.timesteps}
    _echo_config("importance", cfg)
    model = load_model(args.model)
    T = model.config.T
    if args.timesteps:
        ts = [int(x) for x in args.timesteps.split(",")]
    elif T == 1000:
        ts = [1000, 800, 600, 400, 200, 1]
    else:
        ts = sorted({max(1, round(f * T)) for f in (1.0, 0.8, 0.6, 0.4, 0.2)} | {1},
                    reverse=True)
    names = ["noisy_response"] + [c.name for c in model.columns] + ["mean_estimate"]
    fh = _out_stream(args.out)
    try:
        fh.write("timestep,feature_index,feature_name,gain\n")
        for t in ts:
            if not 1 <= t <= T:
                raise DataError(f"timestep {t} outside 1..{T}")
            gains = gain_importance(model.step_trees[t - 1])
            order = np.argsort(-gains, kind="stable")
            for f in order:
                fh.write(f"{t},{f},{names[f]},{float(gains[f])!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_schedule(args) -> int:
    cfg = {"timesteps": args.timesteps, "beta-start": args.beta_start,
           "beta-end": args.beta_end}
    _echo_config("schedule", cfg)
    sched = build_linear_schedule(args.timesteps, args.beta_start, args.beta_end)
    tab = coefficient_table(sched)
    fh = _out_stream(args.out)
    try:
        fh.write("t,gamma0,gamma1,gamma2,tilde_beta\n")
        for row in tab:
            fh.write(f"{int(row[0])},{float(row[1])!r},{float(row[2])!r},{float(row[3])!r},{float(row[4])!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_toy(args) -> int:
    cfg = {"task": args.task, "n": args.n, "seed": args.seed}
    _echo_config("toy", cfg)
    if args.task == "clf":
        ds = clf_toy_generate(args.n, args.seed)
    else:
        ds = toy_generate(args.task, args.n, args.seed)
    save_csv(ds, args.out)
    print(f"[toy] wrote {args.out} ({ds.n_rows} rows)", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# argument wiring

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):           # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _add_train_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--model-kind", choices=["dbt", "card_t"])
    p.add_argument("--task", choices=[REGRESSION, BINARY])
    p.add_argument("--timesteps", type=int)
    p.add_argument("--n-noise", type=int)
    p.add_argument("--num-leaves", type=int)
    p.add_argument("--min-samples-leaf", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--beta-start", type=float)
    p.add_argument("--beta-end", type=float)
    p.add_argument("--prior-mean", choices=["mean_estimator", "zero"])
    p.add_argument("--prototype-epsilon", type=float)
    p.add_argument("--mean-trees", type=int)
    p.add_argument("--mean-leaves", type=int)
    p.add_argument("--mean-shrinkage", type=float)
    p.add_argument("--mcar-rate", type=float)
    p.add_argument("--seed", type=int)


def build_parser():
    top = _Parser(prog="diffboost", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write a model file")
    _add_train_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--response", help="response column name (default: last)")
    p.add_argument("--out", help="model file path")
    p.add_argument("--out-dir", help="directory for default outputs")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate response samples as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--response", help="response column name (default: last)")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="evaluate a model, or retrain across folds")
    _add_train_flags(p)
    p.add_argument("--model")
    p.add_argument("--data", required=True)
    p.add_argument("--response")
    p.add_argument("--samples", type=int)
    p.add_argument("--alpha", type=float, action="append",
                   help="t-test significance level (repeatable)")
    p.add_argument("--qice-bins", type=int, default=10)
    p.add_argument("--threshold", type=float, help="vote threshold override")
    p.add_argument("--folds", type=int, help="retrain across this many folds")
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--threads", type=int)
    p.add_argument("--csv", action="store_true", help="emit CSV instead of text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("importance", help="per-timestep feature gains as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--timesteps", help="comma-separated timesteps")
    p.add_argument("--out")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("schedule", help="posterior-coefficient table as CSV")
    p.add_argument("--timesteps", type=int, default=1000)
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.02)
    p.add_argument("--out")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("toy", help="write a synthetic dataset as CSV")
    p.add_argument("--task", required=True, choices=["a", "b", "c", "d", "e", "clf"])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_toy)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ModelFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:              # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
