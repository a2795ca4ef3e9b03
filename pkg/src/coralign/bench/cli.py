"""Command-line interface.

Exit codes: 0 success; 1 invalid input or configuration; 2 numerical
failure (non-finite values, matrices outside the PSD tolerance); 3 a
check-mode command ran fine but its check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .. import coral, deep as deep_mod, lda as lda_mod
from ..errors import InvalidInputError, NumericalError
from ..linalg import mean_and_covariance
from .data import Dataset
from .io import load_bin, load_csv, save_bin, save_csv
from .runner import (
    ExperimentConfig,
    _load_file_pair,
    _make_trial,
    config_from_dict,
    lambda_sweep,
    run_experiment,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_CHECK_FAILED = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; this CLI reserves 2
    # for numerical failures, so argument problems become invalid-input
    def error(self, message):
        raise InvalidInputError(message)


def _load_dataset(path, has_header=False, has_labels=False, name=None):
    if str(path).endswith(".bin"):
        return load_bin(path, domain_name=name)
    return load_csv(path, has_header=has_header, has_labels=has_labels,
                    domain_name=name)


def _save_dataset(ds, path, header=False):
    if str(path).endswith(".bin"):
        save_bin(ds, path)
    else:
        save_csv(ds, path, header=header)


def _read_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def _int_list(text: str):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise InvalidInputError(f"expected comma-separated numbers, got {text!r}")


def _cmd_transform(args) -> int:
    src = _load_dataset(args.source, args.csv_has_header, args.source_labels,
                        "source")
    tgt = _load_dataset(args.target, args.csv_has_header, args.target_labels,
                        "target")
    if args.analytical:
        tr = coral.fit_analytical(src.features, tgt.features)
    else:
        tr = coral.fit_regularized(src.features, tgt.features, args.lam)
    moved = coral.apply_to_features(tr, src.features)
    _save_dataset(Dataset(moved, src.labels, src.domain_name), args.out)
    ct = mean_and_covariance(tgt.features).cov
    pre = np.linalg.norm(mean_and_covariance(src.features).cov - ct)
    post = np.linalg.norm(mean_and_covariance(moved).cov - ct)
    mode = "analytical" if args.analytical else f"lambda={args.lam:g}"
    print(f"transformed {src.n} rows, dim {src.d} ({mode}); "
          f"covariance gap {pre:.6g} -> {post:.6g}")
    return EXIT_OK


def _cmd_lda(args) -> int:
    train = _load_dataset(args.train, args.csv_has_header, True, "train")
    if train.labels is None:
        raise InvalidInputError("training dataset must carry labels")
    if int(train.labels.max()) + 1 != 2:
        raise InvalidInputError("the lda command fits a binary discriminant "
                                "(labels 0/1)")
    mu1 = train.features[train.labels == 1].mean(axis=0)
    mu0 = train.features[train.labels == 0].mean(axis=0)
    stats_train = mean_and_covariance(train.features)
    if args.mode == "coral":
        if not args.stats_from:
            raise InvalidInputError("--stats-from is required with --mode coral")
        other = _load_dataset(args.stats_from, args.csv_has_header, False, "stats")
        stats_other = mean_and_covariance(other.features)
        model = lda_mod.fit_coral_lda(lda_mod.LdaInputs(
            mu_pos=mu1, mu_neg=mu0,
            cov_source=stats_train.cov, cov_target=stats_other.cov,
            lam=args.lam,
        ))
        dist = lda_mod.domain_distance(stats_train, stats_other)
        print(f"coral discriminant fitted (dim {train.d}); "
              f"domain distance {dist:.6g}")
    else:
        model = lda_mod.fit_lda(lda_mod.LdaInputs(
            mu_pos=mu1, mu_neg=mu0, cov_source=stats_train.cov, lam=args.lam,
        ))
        print(f"plain discriminant fitted (dim {train.d})")
    if args.out:
        _save_dataset(Dataset(model.w[None, :], None, "weights"), args.out)
    else:
        print(",".join(format(v, ".17g") for v in model.w))
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _read_config(args.config)
    if args.trials is not None:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed_base=args.seed)
    report = run_experiment(cfg)
    for name, m in report.methods.items():
        print(f"{name}: target {m.target_acc_mean:.4f} +/- {m.target_acc_std:.4f}"
              f" (source {m.source_acc_mean:.4f},"
              f" {m.wall_clock_seconds:.2f}s)")
    blob = json.dumps(report.to_dict(), indent=2)
    if args.report_out:
        Path(args.report_out).write_text(blob + "\n")
    else:
        print(blob)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _read_config(args.config)
    if args.trials is not None:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed_base=args.seed)
    rep = lambda_sweep(cfg, _float_list(args.lambdas),
                       include_analytical=not args.no_analytical)
    for row in rep.rows:
        print(f"lambda={row['lam']}: target {row['target_acc_mean']:.4f} "
              f"+/- {row['target_acc_std']:.4f}")
    blob = json.dumps(rep.to_dict(), indent=2)
    if args.report_out:
        Path(args.report_out).write_text(blob + "\n")
    else:
        print(blob)
    return EXIT_OK


def _cmd_deep(args) -> int:
    cfg = _read_config(args.config)
    pair = _load_file_pair(cfg) if cfg.spec is None else None
    trial = _make_trial(cfg, cfg.seed_base, pair)
    s = cfg.deep
    K = int(trial.ys.max()) + 1
    net = deep_mod.init_network([trial.Xs.shape[1], s.hidden, K],
                                seed=cfg.seed_base)
    tc = deep_mod.TrainConfig(
        coral_weights=[s.coral_weight],
        learning_rate=s.learning_rate,
        batch_size=s.batch_size,
        iterations=s.iterations,
        seed=cfg.seed_base,
        momentum=s.momentum,
    )
    _, rep = deep_mod.train_joint(net, trial.Xs, trial.ys, trial.Xt, tc,
                                  target_labels=trial.yt)
    if args.curves_out:
        n_layers = rep.coral_loss.shape[1]
        head = ["iteration", "class_loss"]
        head += [f"coral_loss_{i}" for i in range(n_layers)]
        head += ["source_acc", "target_acc"]
        lines = [",".join(head)]
        for i in range(len(rep.class_loss)):
            cells = [str(i), format(rep.class_loss[i], ".10g")]
            cells += [format(v, ".10g") for v in rep.coral_loss[i]]
            cells += [format(rep.source_acc[i], ".10g"),
                      format(rep.target_acc[i], ".10g")]
            lines.append(",".join(cells))
        Path(args.curves_out).write_text("\n".join(lines) + "\n")
    print(f"final source acc {rep.source_acc[-1]:.4f}, "
          f"target acc {rep.target_acc[-1]:.4f}, "
          f"alignment distance {rep.final_coral_distance:.6g}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    if args.step <= 0:
        raise InvalidInputError("--step must be positive")
    worst = 0.0
    checks = 0
    for seed in range(args.seeds):
        for n in _int_list(args.n):
            for d in _int_list(args.d):
                rng = np.random.default_rng(seed * 10007 + n * 101 + d)
                S = rng.standard_normal((n, d))
                T = rng.standard_normal((n, d))
                worst = max(worst, deep_mod.finite_diff_check(S, T, args.step))
                checks += 1
    print(f"max relative error {worst:.3e} over {checks} checks "
          f"(tolerance {args.tol:g})")
    return EXIT_OK if worst <= args.tol else EXIT_CHECK_FAILED


def _cmd_convert(args) -> int:
    src, dst = str(args.input), str(args.output)
    if src.endswith(".csv") and dst.endswith(".bin"):
        ds = load_csv(args.input, has_header=args.csv_has_header,
                      has_labels=args.csv_has_labels)
        save_bin(ds, args.output)
    elif src.endswith(".bin") and dst.endswith(".csv"):
        ds = load_bin(args.input)
        save_csv(ds, args.output, header=args.csv_has_header)
    else:
        raise InvalidInputError(
            "convert supports .csv -> .bin and .bin -> .csv"
        )
    print(f"converted {ds.n} rows, dim {ds.d} "
          f"({'with' if ds.labels is not None else 'no'} labels)")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="coralign",
                     description="Covariance alignment for domain shift: "
                                 "transforms, discriminants, benchmarks.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("transform", help="fit and apply the alignment map")
    p.add_argument("--source", required=True, help="labeled source dataset")
    p.add_argument("--target", required=True, help="target dataset (features)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="regularization strength (default 1.0)")
    p.add_argument("--analytical", action="store_true",
                   help="use the pseudoinverse-root path instead of --lambda")
    p.add_argument("--out", required=True, help="output path (.csv or .bin)")
    p.add_argument("--source-labels", action="store_true",
                   help="the source CSV ends with an integer label column")
    p.add_argument("--target-labels", action="store_true",
                   help="the target CSV ends with an integer label column")
    p.add_argument("--csv-has-header", action="store_true")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("lda", help="fit a binary discriminant")
    p.add_argument("--train", required=True, help="labeled dataset (labels 0/1)")
    p.add_argument("--mode", choices=("plain", "coral"), default="plain")
    p.add_argument("--stats-from",
                   help="dataset supplying the evaluation-side covariance "
                        "(coral mode)")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--out", help="write the weight vector here (1 x d)")
    p.add_argument("--csv-has-header", action="store_true")
    p.set_defaults(func=_cmd_lda)

    p = sub.add_parser("bench", help="run the method comparison")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--report-out", help="write the JSON report here")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("sweep-lambda",
                       help="accuracy across regularization strengths")
    p.add_argument("--config", required=True)
    p.add_argument("--lambdas", default="0.001,0.01,0.1,1")
    p.add_argument("--no-analytical", action="store_true",
                   help="skip the analytical row")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--report-out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("deep", help="one joint training run with curves")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--curves-out", help="per-iteration CSV")
    p.set_defaults(func=_cmd_deep)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of the alignment-loss "
                            "gradient")
    p.add_argument("--n", default="4,8,32", help="comma list of batch sizes")
    p.add_argument("--d", default="2,5,16", help="comma list of widths")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("convert", help="convert between .csv and .bin")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--csv-has-header", action="store_true")
    p.add_argument("--csv-has-labels", action="store_true")
    p.set_defaults(func=_cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise InvalidInputError("no subcommand given (see --help)")
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
