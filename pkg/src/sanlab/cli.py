"""Command-line front end.

Subcommands: norm, compensation, fit1d, train, sparsity, singvals, bench,
ablate. Results go to --out (or stdout) as CSV or JSON; diagnostics go to
stderr. Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures
(bad files, size guards, invalid values). `--figures DIR` additionally
renders the matching matplotlib figure next to the delimited output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .compensation import (
    compensation_factor,
    mc_expected_max,
    sample_filter_subset,
    subset_size,
)
from .gan_lab import (
    ExperimentConfig,
    bench_update,
    hyperparameter_settings,
    multiplier_grid,
    ring8_centers,
    rows_to_csv,
    run_ablation_grid,
    run_fit1d,
    run_wgan,
    sparsity_probe,
    singvals_report,
)
from .normalizer import NormalizationPolicy
from .nn_autodiff import save_checkpoint
from .operator_norms import (
    NormEstimate,
    SizeGuardError,
    exact_conv_spectral_norm,
    reshape_spectral_norm,
    san_norm,
    san_subset_norm,
)
from .oracles import oracle_exact_norm, oracle_san_norm
from .rng import philox
from .tensor_core import DimensionError, KernelBank, load_sant


def _diag(msg: str) -> None:
    print(msg, file=sys.stderr)


def _plane(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        h, w = int(h), int(w)
        if h < 1 or w < 1:
            raise ValueError
        return h, w
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad plane {text!r}, expected HxW") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad int list {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [t for t in text.split(",") if t]


def _compensation(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad compensation {text!r}, expected 'auto' or a number"
        ) from None


def _json_safe(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def _emit(args, rows, header, default_format="csv") -> None:
    fmt = args.format or default_format
    if fmt == "csv":
        text = rows_to_csv(header, rows)
    else:
        text = json.dumps(_json_safe(rows), indent=1) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        _diag(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


def _emit_single(args, record: dict, header, default_format="json") -> None:
    fmt = args.format or default_format
    if fmt == "csv":
        text = rows_to_csv(header, [record])
    else:
        text = json.dumps(_json_safe(record), indent=1) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        _diag(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_norm(args) -> int:
    arr = load_sant(args.input)
    if arr.ndim != 4:
        raise DimensionError(
            f"{args.input}: expected a 4-D kernel bank, got shape {list(arr.shape)}"
        )
    bank = KernelBank(arr.astype(np.float64))
    h, w = args.plane
    if args.method == "san":
        est = san_norm(bank, h, w)
    elif args.method == "san_subset":
        plan = sample_filter_subset(bank.out_channels, bank.in_channels,
                                    args.rate, args.seed)
        est = san_subset_norm(bank, h, w, plan, compensation=args.compensation)
    elif args.method == "exact":
        est = exact_conv_spectral_norm(bank, h, w)
    elif args.method == "reshape":
        est = reshape_spectral_norm(bank)
    elif args.method == "oracle_san":
        est = NormEstimate(value=oracle_san_norm(bank, h, w), method="oracle_san",
                           signal_height=h, signal_width=w)
    else:
        est = NormEstimate(value=oracle_exact_norm(bank, h, w), method="oracle_exact",
                           signal_height=h, signal_width=w)
    record = est.to_dict()
    record["argmax"] = (
        "" if record["argmax"] is None else ":".join(str(i) for i in record["argmax"])
    )
    _emit_single(args, record, list(record.keys()))
    return 0


def cmd_compensation(args) -> int:
    rows = []
    for total in args.filters:
        for rate in args.rates:
            k = subset_size(total, rate)
            row = {"total": total, "rate": rate, "subset": k,
                   "g_formula": compensation_factor(total, rate)}
            if args.trials > 0:
                row["g_montecarlo"] = (
                    mc_expected_max(total, args.trials, seed=args.seed)
                    / mc_expected_max(k, args.trials, seed=args.seed + 1)
                )
            else:
                row["g_montecarlo"] = float("nan")
            rows.append(row)
    header = ["total", "rate", "subset", "g_formula", "g_montecarlo"]
    _emit(args, rows, header)
    if args.figures:
        from . import figures
        p = figures.compensation_figure(rows, Path(args.figures) / "compensation.png")
        _diag(f"wrote {p}")
    return 0


def _fit1d_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=args.dataset, period=args.period, amplitude=args.amplitude,
        policy=NormalizationPolicy(method="none"), batch=args.batch,
        steps=args.steps, lr=args.lr, beta1=args.beta1, beta2=args.beta2,
        seed=args.seed, eval_every=args.eval_every,
    )


def cmd_fit1d(args) -> int:
    rows, header, _ = run_fit1d(_fit1d_config(args), hidden=args.hidden,
                                half_width=args.half_width)
    _emit(args, rows, header)
    if args.figures:
        from . import figures
        p = figures.fit1d_figure(rows, Path(args.figures) / "fit1d.png")
        _diag(f"wrote {p}")
    return 0


def _train_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    overrides = {}
    for name in ("dataset", "n_dis", "batch", "steps", "lr", "beta1", "beta2",
                 "seed", "eval_every", "norm_order"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.record_timing:
        overrides["record_timing"] = True
    policy_overrides = {}
    for name in ("method", "every", "rate", "compensation", "multiplier", "clip"):
        value = getattr(args, name)
        if value is not None:
            policy_overrides[name] = value
    if policy_overrides:
        overrides["policy"] = replace(cfg.policy, **policy_overrides)
    return replace(cfg, **overrides) if overrides else cfg


def cmd_train(args) -> int:
    cfg = _train_config(args)
    result = run_wgan(cfg)
    _emit(args, result.flat_rows, result.header)
    if args.checkpoints:
        out = Path(args.checkpoints)
        extra = {"dataset": cfg.dataset, "config": cfg.to_dict()}
        save_checkpoint(result.generator, out / "generator", cfg.seed, cfg.steps, extra)
        save_checkpoint(result.critic, out / "critic", cfg.seed, cfg.steps, extra)
        _diag(f"wrote checkpoints under {out}")
    if args.figures:
        from . import figures
        p = figures.training_figure(result.flat_rows,
                                    Path(args.figures) / "training.png")
        _diag(f"wrote {p}")
        if cfg.dataset == "ring8":
            z = philox(cfg.seed, 8).standard_normal((4096, 16))
            samples, _ = result.generator.forward(z)
            p = figures.ring_scatter_figure(samples, ring8_centers(),
                                            Path(args.figures) / "samples.png")
            _diag(f"wrote {p}")
    return 0


def cmd_sparsity(args) -> int:
    rows, header, fraction = sparsity_probe(
        args.checkpoint, args.layer, args.batch, eps=args.eps, seed=args.seed,
        bins=args.bins,
    )
    _diag(f"fraction of channel norms <= {args.eps:g}: {fraction:.6f}")
    _emit(args, rows, header)
    if args.figures:
        from . import figures
        p = figures.sparsity_figure(rows, Path(args.figures) / "sparsity.png")
        _diag(f"wrote {p}")
    return 0


def cmd_singvals(args) -> int:
    rows, header = singvals_report(args.checkpoint)
    _emit(args, rows, header)
    if args.figures:
        from . import figures
        p = figures.singvals_figure(rows, Path(args.figures) / "singvals.png")
        _diag(f"wrote {p}")
    return 0


def cmd_bench(args) -> int:
    cfg = ExperimentConfig(
        dataset=args.dataset, batch=args.batch, seed=args.seed,
        policy=NormalizationPolicy(method="none", every=args.every),
    )
    rows, header = bench_update(cfg, args.methods, reps=args.reps)
    _emit(args, rows, header)
    if args.figures:
        from . import figures
        p = figures.bench_figure(rows, Path(args.figures) / "bench.png")
        _diag(f"wrote {p}")
    return 0


def cmd_ablate(args) -> int:
    if args.grid:
        spec = json.loads(Path(args.grid).read_text())
        if isinstance(spec, dict):
            configs = {name: ExperimentConfig.from_dict(d) for name, d in spec.items()}
        else:
            configs = [ExperimentConfig.from_dict(d) for d in spec]
    else:
        base = ExperimentConfig(
            dataset=args.dataset, steps=args.steps, batch=args.batch,
            seed=args.seed, eval_every=args.eval_every,
            policy=NormalizationPolicy(method=args.method, every=args.every),
        )
        if args.preset == "settings":
            configs = hyperparameter_settings(base)
        else:
            configs = multiplier_grid(base)
    rows, header = run_ablation_grid(configs)
    _emit(args, rows, header)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--out", help="write results here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"),
                        help="output encoding (default: csv; norm defaults to json)")
    common.add_argument("--figures", metavar="DIR",
                        help="also render matplotlib figures into DIR")

    parser = argparse.ArgumentParser(
        prog="sanlab",
        description="operator norms and toy normalized-critic experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", parents=[common],
                       help="norm estimate of a kernel bank from a .sant file")
    p.add_argument("--input", required=True, help="4-D kernel bank (.sant)")
    p.add_argument("--plane", required=True, type=_plane, help="signal dims HxW")
    p.add_argument("--method", default="san",
                   choices=("san", "san_subset", "exact", "reshape",
                            "oracle_san", "oracle_exact"))
    p.add_argument("--rate", type=float, default=0.25, help="subset rate")
    p.add_argument("--compensation", type=_compensation, default="auto")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("compensation", parents=[common],
                       help="compensation factors: formula vs Monte Carlo")
    p.add_argument("--filters", type=_int_list, default=[4096],
                   help="comma list of filter totals")
    p.add_argument("--rates", type=_float_list, default=[0.25, 0.5, 1.0],
                   help="comma list of subset rates")
    p.add_argument("--trials", type=int, default=20000,
                   help="Monte Carlo trials (0 skips the check)")
    p.set_defaults(func=cmd_compensation)

    p = sub.add_parser("fit1d", parents=[common],
                       help="1-D fit, vanilla vs unit-norm projection")
    p.add_argument("--dataset", default="triangle_wave",
                   choices=("identity_line", "triangle_wave"))
    p.add_argument("--period", type=float, default=2.0)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--half-width", type=float, default=2.0, dest="half_width")
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--beta1", type=float, default=0.5)
    p.add_argument("--beta2", type=float, default=0.9)
    p.add_argument("--eval-every", type=int, default=100, dest="eval_every")
    p.set_defaults(func=cmd_fit1d)

    p = sub.add_parser("train", parents=[common],
                       help="hinge-loss training with critic normalization")
    p.add_argument("--config", help="ExperimentConfig JSON file")
    p.add_argument("--dataset", choices=("ring8", "textures16"))
    p.add_argument("--method",
                   choices=("none", "weight_clip", "reshape_sn", "exact_sn",
                            "san", "san_subset"))
    p.add_argument("--every", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--compensation", type=_compensation)
    p.add_argument("--multiplier", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--n-dis", type=int, dest="n_dis")
    p.add_argument("--batch", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--norm-order", choices=("pre", "post"), dest="norm_order")
    p.add_argument("--record-timing", action="store_true", dest="record_timing")
    p.add_argument("--checkpoints", help="save generator/critic checkpoints here")
    # --seed overrides the config file only when given explicitly
    p.set_defaults(func=cmd_train, seed=None)

    p = sub.add_parser("sparsity", parents=[common],
                       help="channel-norm histogram at a conv layer's input")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--layer", required=True, type=int)
    p.add_argument("--batch", type=int, default=2048)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--bins", type=int, default=32)
    p.set_defaults(func=cmd_sparsity)

    p = sub.add_parser("singvals", parents=[common],
                       help="per-layer exact/reshape/san norms of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_singvals)

    p = sub.add_parser("bench", parents=[common],
                       help="median critic-update wall time per method")
    p.add_argument("--dataset", default="textures16", choices=("ring8", "textures16"))
    p.add_argument("--methods", type=_str_list,
                   default=["none", "san", "reshape_sn", "exact_sn"])
    p.add_argument("--reps", type=int, default=31)
    p.add_argument("--every", type=int, default=1)
    p.add_argument("--batch", type=int, default=64)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", parents=[common],
                       help="run a grid of configs and tabulate final metrics")
    p.add_argument("--grid", help="JSON file of named ExperimentConfig dicts")
    p.add_argument("--preset", default="settings", choices=("settings", "multipliers"))
    p.add_argument("--dataset", default="ring8", choices=("ring8", "textures16"))
    p.add_argument("--method", default="san")
    p.add_argument("--every", type=int, default=1)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--eval-every", type=int, default=100, dest="eval_every")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        _diag(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
