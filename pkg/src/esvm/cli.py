"""Command-line entry point: ``esvm {sample,fit,estimate,replicate,acf}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config_text
from .errors import ConfigError, ConvergenceError, DivergenceError, SingularSystemError
from .experiments import (
    acf_series,
    build_experiment,
    emit_acf_report,
    evaluation_seed,
    run_pipeline,
    run_replicates,
)
from .fit import assemble_quadratic, solve_coefficients
from .control_variates import evaluate_basis
from .io import write_trajectory_binary, write_trajectory_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--preset", choices=["toy", "gmm", "logreg"])
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", type=Path, default=Path("."))

    p = argparse.ArgumentParser(prog="esvm", description="Spectral-variance control variates for MCMC.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sample", parents=[common], help="write a trajectory CSV")
    s.add_argument("--phase", choices=["learn", "eval"], default="learn")
    s.add_argument("--binary", action="store_true", help="also write the binary dump")
    sub.add_parser("fit", parents=[common], help="fit CV coefficients on the learning run")
    sub.add_parser("estimate", parents=[common], help="run the learn/evaluate pipeline")
    r = sub.add_parser("replicate", parents=[common], help="replicate study over none/evm/esvm")
    r.add_argument("--replicates", type=int)
    r.add_argument("--workers", type=int, default=1)
    sub.add_parser("acf", parents=[common], help="autocovariance report for none/evm/esvm")
    return p


def _load(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_config_text(args.config, args.preset, overrides)


def _run(args) -> None:
    config = _load(args)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "sample":
        exp = build_experiment(config)
        if args.phase == "learn":
            traj = exp.sample(config.n_train, config.seed)
        else:
            traj = exp.sample(config.n_test, evaluation_seed(config.seed))
        path = write_trajectory_csv(traj, out / "trajectory.csv")
        print(f"wrote {path}")
        if args.binary:
            print(f"wrote {write_trajectory_binary(traj, out / 'trajectory.bin')}")

    elif args.command == "fit":
        if config.method == "none":
            raise ConfigError("method: fit needs evm or esvm")
        exp = build_experiment(config)
        traj = exp.sample(config.n_train, config.seed)
        window = exp.window(traj.n) if config.method == "esvm" else None
        q = assemble_quadratic(exp.functional(traj.samples), evaluate_basis(traj, exp.basis),
                               config.method, window, config.ridge)
        fit = solve_coefficients(q)
        (out / "fit.txt").write_text(fit.to_text(), encoding="utf-8")
        sys.stdout.write(fit.to_text())

    elif args.command == "estimate":
        res = run_pipeline(config)
        lines = [
            f"method = {res.method}",
            f"estimate = {res.estimate!r}",
            f"spectral_variance_raw = {res.spectral_variance_raw!r}",
            f"spectral_variance_adjusted = {res.spectral_variance_adjusted!r}",
            f"n_eval = {res.n_eval}",
        ]
        text = "\n".join(lines) + "\n"
        (out / "estimate.txt").write_text(text, encoding="utf-8")
        if res.fit is not None:
            (out / "fit.txt").write_text(res.fit.to_text(), encoding="utf-8")
        sys.stdout.write(text)

    elif args.command == "replicate":
        study = run_replicates(config, args.replicates, workers=args.workers)
        summary, long = study.write(out)
        for m, s in study.summaries.items():
            print(f"{m:5s} mean={s.mean:.6g} var={s.var:.4g} median={s.median:.6g}")
        print(f"wrote {summary} and {long}")

    elif args.command == "acf":
        series = acf_series(config)
        path = emit_acf_report(series.raw, series.evm, series.esvm, series.window, out / "acf.csv")
        print(f"wrote {path}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _run(args)
    except (DivergenceError, SingularSystemError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
