"""Shared driver for the preset experiment scripts."""
import argparse
import time
from pathlib import Path

import numpy as np

from esvm.config import load_config_text
from esvm.experiments import acf_series, build_experiment, emit_acf_report, run_replicates


def run(preset: str, default_replicates: int, description: str) -> None:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--replicates", type=int, default=default_replicates)
    p.add_argument("--out-dir", type=Path, default=Path("results") / preset)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    args = p.parse_args()

    config = load_config_text(preset=preset, overrides=args.overrides)
    exp = build_experiment(config)
    start = time.perf_counter()

    def progress(r):
        if (r + 1) % 10 == 0:
            print(f"  replicate {r + 1}/{args.replicates} ({time.perf_counter() - start:.0f}s)", flush=True)

    study = run_replicates(config, args.replicates, experiment=exp, progress=progress)
    summary, long = study.write(args.out_dir)
    series = acf_series(config, exp)
    acf = emit_acf_report(series.raw, series.evm, series.esvm, series.window, args.out_dir / "acf.csv")

    print(f"{preset}: {args.replicates} replicates in {time.perf_counter() - start:.0f}s")
    base = study.summaries["none"].var
    for m, s in study.summaries.items():
        print(f"  {m:5s} mean={s.mean:+.6f} var={s.var:.3e} (x{base / s.var:.1f} vs none)")
    print(f"  lag-window truncation {series.window.truncation}")
    print(f"wrote {summary}, {long}, {acf}")
