"""Command line entry point: ``autocal {test,quantiles,simulate,power,sample}``.

Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import asymptotics, core, formats
from . import rng as _rng
from .asymptotics import DEFAULT_MC_DRAWS
from .errors import AutocalError, ValidationError
from .simulation import Contamination, default_grid, power_study, replicate_stats, simulate_sample
from .testing import MCConfig, TestFailure, assess, null_quantiles

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _alpha(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    try:
        return _rng.check_seed(int(text, 0))
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_grid(text: str | None) -> tuple:
    """``start:stop:count`` (inclusive, evenly spaced) or a comma-separated list."""
    if text is None:
        return default_grid()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValidationError("grid count must be positive")
        if count == 1:
            return (start,)
        return tuple(start + (stop - start) * j / (count - 1) for j in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _common(p: argparse.ArgumentParser, *, mc=True, seed=True, out=True):
    p.add_argument("--alpha", type=_alpha, default=0.05, help="significance level (default 0.05)")
    if seed:
        p.add_argument("--seed", type=_seed, default=None,
                       help="root seed; generated and recorded when omitted")
    if mc:
        p.add_argument("--mc-draws", type=_positive_int, default=DEFAULT_MC_DRAWS,
                       help="Monte Carlo draws for random-walk and weighted chi-square limits")
        p.add_argument("--threads", type=_positive_int, default=1)
    if out:
        p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--error-json", action="store_true",
                   help="print errors as a JSON object on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autocal", description="Auto-calibration tests for finite-valued regression functions."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {formats.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run the seven tests on a y,pi CSV")
    p.add_argument("input", type=Path)
    p.add_argument("--reference", type=Path, help="reference CSV for estimating the null model")
    p.add_argument("--model", help="null model JSON (inline, file path, or 'table1')")
    p.add_argument("--bins", type=_positive_int, help="discretize predictions into K quantile bins")
    _common(p)

    p = sub.add_parser("quantiles", help="critical values of the seven tests")
    p.add_argument("--model", help="null model JSON (inline, file path, or 'table1')")
    p.add_argument("--reference", type=Path, help="reference CSV for estimating the null model")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="stdout format when --out is not given")
    _common(p)

    p = sub.add_parser("simulate", help="replicate the gamma example and summarize")
    p.add_argument("--model", help="gamma model JSON with levels, probs, rate (default table1)")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--bin-width", type=float, default=0.1, help="histogram bin width")
    _common(p)

    p = sub.add_parser("power", help="power curves over a contamination grid")
    p.add_argument("--model", help="gamma model JSON with levels, probs, rate (default table1)")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--grid", help="start:stop:count or comma list (default 0:1:21)")
    p.add_argument("--contamination", choices=("global", "local"), default="global")
    p.add_argument("--level-index", type=_positive_int, help="1-based level for local shifts")
    p.add_argument("--estimate-model", action="store_true",
                   help="re-estimate the null model per replication from a reference sample")
    _common(p)

    p = sub.add_parser("sample", help="write one simulated gamma sample as CSV")
    p.add_argument("--model", help="gamma model JSON with levels, probs, rate (default table1)")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--contamination", choices=("none", "global", "local"), default="none")
    p.add_argument("--level-index", type=_positive_int)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--out", type=Path, required=True, help="output CSV file")
    p.add_argument("--error-json", action="store_true")
    return parser


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = _rng.fresh_seed()
        print(f"autocal: no --seed given, using {args.seed}", file=sys.stderr)
    return args.seed


def _out_dir(args) -> Path | None:
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_test(args) -> int:
    seed = _resolve_seed(args)
    sample = formats.read_sample_csv(args.input)
    binning = None
    if args.bins is not None:
        if args.reference is not None or args.model is not None:
            raise ValidationError("--bins cannot be combined with --reference or --model")
        sample, partition = core.bin_by_quantiles(sample, args.bins)
        binning = {"requested": args.bins, "levels": list(partition.levels)}
    model = formats.read_null_model(args.model) if args.model else None
    reference = formats.read_sample_csv(args.reference) if args.reference else None
    mc = MCConfig(args.mc_draws, seed, args.threads)
    report = assess(sample, model=model, reference=reference, level=args.alpha, mc=mc)
    payload = formats.provenance(
        "test", seed, args.mc_draws, rng=_rng.rng_metadata(seed),
        input=str(args.input), reference=str(args.reference) if args.reference else None,
    )
    payload.update(
        n=report.n,
        alpha=args.alpha,
        model_source=report.model_source,
        warnings=report.warnings,
        model=dict(report.model.to_dict(), digest=report.model.digest()),
        binning=binning,
        outcomes=[o.to_dict() for o in report.outcomes],
    )
    out = _out_dir(args)
    text = formats.dump_json(payload, out / "report.json" if out else None)
    if out is None:
        sys.stdout.write(text)
    else:
        for o in report.outcomes:
            if isinstance(o, TestFailure):
                print(f"{o.test_id.value}: {o.error}: {o.message}")
            else:
                verdict = "reject" if o.reject else "accept"
                print(f"{o.test_id.value}: statistic={o.statistic:.4f} "
                      f"critical={o.critical_value:.4f} p={o.p_value:.4g} {verdict}")
    failed = [o for o in report.outcomes if isinstance(o, TestFailure)]
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_quantiles(args) -> int:
    seed = _resolve_seed(args)
    if args.model and args.reference:
        raise ValidationError("give either --model or --reference, not both")
    if args.model:
        model, source = formats.read_null_model(args.model), "supplied"
    elif args.reference:
        model, source = core.estimate_null_model(formats.read_sample_csv(args.reference)), "reference"
    else:
        raise ValidationError("a null model is required: --model or --reference")
    quantiles = null_quantiles(model, args.alpha, MCConfig(args.mc_draws, seed, args.threads))
    prov = formats.provenance("quantiles", seed, args.mc_draws, rng=_rng.rng_metadata(seed))
    rows = []
    for tid, q in quantiles.items():
        rows.append([tid.value, q.critical_value, args.alpha, q.method,
                     q.mc_standard_error if q.mc_standard_error is not None else "",
                     q.seed if q.seed is not None else ""])
    payload = dict(prov, alpha=args.alpha, model_source=source,
                   model=dict(model.to_dict(), digest=model.digest()),
                   quantiles={tid.value: q.to_dict() for tid, q in quantiles.items()})
    header = ["test_id", "critical_value", "alpha", "method", "mc_standard_error", "seed"]
    out = _out_dir(args)
    if out is not None:
        formats.dump_json(payload, out / "quantiles.json")
        formats.write_rows_csv(out / "quantiles.csv", header, rows, prov)
    elif args.format == "csv":
        sys.stdout.write(formats.provenance_comment(prov))
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    else:
        sys.stdout.write(formats.dump_json(payload))
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    out = _out_dir(args)
    if out is None:
        raise ValidationError("simulate requires --out")
    model = formats.read_gamma_model(args.model)
    summary = replicate_stats(model, args.n, args.reps, seed, threads=args.threads,
                              alpha=args.alpha, mc_draws=args.mc_draws, bin_width=args.bin_width)
    null = model.null_model()
    prov = formats.provenance("simulate", seed, args.mc_draws, rng=_rng.rng_metadata(seed),
                              gamma_sampler=model.to_dict()["sampler"])
    payload = dict(
        prov, n=args.n, reps=args.reps, alpha=args.alpha, model=model.to_dict(),
        mean_sqrt_n_S=summary.mean_S, mean_sqrt_n_T=summary.mean_T,
        cov_sqrt_n_S=summary.cov_S, cov_sqrt_n_T=summary.cov_T,
        theoretical_cov_S=asymptotics.asymptotic_cov(null, "increments"),
        theoretical_cov_T=asymptotics.asymptotic_cov(null, "random_walk"),
        level_counts=summary.level_counts, level_means=summary.level_means,
        level_variances=summary.level_variances,
        critical_values={t.value: v for t, v in summary.critical_values.items()},
        rejections={t.value: c for t, c in summary.rejections.items()},
        rejection_rates={t.value: c / args.reps for t, c in summary.rejections.items()},
    )
    formats.dump_json(payload, out / "summary.json")
    formats.write_matrix_csv(out / "cov_S.csv", summary.cov_S, prov)
    formats.write_matrix_csv(out / "cov_T.csv", summary.cov_T, prov)
    rows = []
    for name, (edges, counts) in summary.histograms.items():
        rows.extend([name, float(lo), float(hi), int(c)]
                    for lo, hi, c in zip(edges[:-1], edges[1:], counts))
    formats.write_rows_csv(out / "histograms.csv", ["statistic", "bin_left", "bin_right", "count"],
                           rows, prov)
    print(f"wrote summary.json, cov_S.csv, cov_T.csv, histograms.csv to {out}")
    return EXIT_OK


def cmd_power(args) -> int:
    seed = _resolve_seed(args)
    out = _out_dir(args)
    if out is None:
        raise ValidationError("power requires --out")
    if args.contamination == "local" and args.level_index is None:
        raise ValidationError("--contamination local requires --level-index")
    model = formats.read_gamma_model(args.model)
    grid = parse_grid(args.grid)
    curves = power_study(model, args.n, args.reps, grid, args.contamination, args.level_index,
                         args.alpha, seed, mc_draws=args.mc_draws, threads=args.threads,
                         estimate_model=args.estimate_model)
    prov = formats.provenance("power", seed, args.mc_draws, rng=_rng.rng_metadata(seed))
    rows = []
    for c in curves:
        for d, rate, count in zip(c.deltas, c.rates, c.rejections):
            rows.append([c.test_id.value, d, rate, count, c.reps, c.kind,
                         c.contaminated_level if c.contaminated_level is not None else ""])
    formats.write_rows_csv(
        out / "power.csv",
        ["test_id", "delta", "rejection_rate", "rejections", "reps", "contamination", "level_index"],
        rows, prov,
    )
    payload = dict(prov, n=args.n, reps=args.reps, alpha=args.alpha, model=model.to_dict(),
                   contamination=args.contamination, level_index=args.level_index,
                   estimate_model=args.estimate_model, grid=list(grid),
                   critical_values={c.test_id.value: c.critical_value for c in curves})
    formats.dump_json(payload, out / "power.json")
    print(f"wrote power.csv and power.json to {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    seed = _resolve_seed(args)
    model = formats.read_gamma_model(args.model)
    if args.contamination == "none":
        contamination = Contamination()
    elif args.contamination == "global":
        contamination = Contamination.global_shift(args.delta)
    else:
        contamination = Contamination.local_shift(args.level_index, args.delta)
    sample = simulate_sample(model, args.n, contamination, seed)
    if args.out.parent != Path(""):
        args.out.parent.mkdir(parents=True, exist_ok=True)
    formats.write_sample_csv(sample, args.out, formats.provenance("sample", seed, None))
    return EXIT_OK


COMMANDS = {"test": cmd_test, "quantiles": cmd_quantiles, "simulate": cmd_simulate,
            "power": cmd_power, "sample": cmd_sample}


def _report_error(exc: Exception, args) -> None:
    if getattr(args, "error_json", False):
        info = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("row", "line", "column", "level", "count", "value"):
            if getattr(exc, attr, None) is not None:
                info[attr] = getattr(exc, attr)
        sys.stdout.write(json.dumps(info) + "\n")
    else:
        print(f"autocal: error: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        _report_error(exc, args)
        return EXIT_INPUT
    except (AutocalError, FloatingPointError) as exc:
        _report_error(exc, args)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # argument values that only fail once parsed (e.g. a malformed --grid)
        _report_error(ValidationError(str(exc)), args)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
