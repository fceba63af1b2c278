"""Command-line entry point.

    photogemm gemm A.csv B.csv --out C.csv
    photogemm experiment error-scaling --sizes 16,64,128
    photogemm experiment mantissa-sweep --sizes 128
    photogemm experiment noise-char
    photogemm perf --size 1024
    photogemm perf sweep-ppus --counts 25,50,100,200
    photogemm area-power
    photogemm calibrate

Exit status: 0 on success, 1 on runtime errors, 2 on usage or shape errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import experiments, perf
from .config import SystemConfig, load_config
from .engine import matrix_multiply
from .errors import InvalidConfig, PhotoGemmError, ShapeError
from .matrix_io import read_matrix, write_matrix
from .metrics import gemm_rel_l2_bound
from .bfp import quantize_matrix
from .report import dumps, make_report

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _int_list(text: str) -> list[int]:
    """``"16,64,128"`` or a range ``"6-20"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("expected a list of integers")
    return out


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="root seed (default: noise.seed from the config, 0)")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="photogemm", description="Photonic BFP GEMM accelerator simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gemm", parents=[common], help="multiply two matrix files")
    g.add_argument("a_path")
    g.add_argument("b_path")
    g.add_argument("--report", help="where to write the run report (default: standard output)")

    ex = sub.add_parser("experiment", help="run an experiment")
    exs = ex.add_subparsers(dest="experiment", required=True)
    es = exs.add_parser("error-scaling", parents=[common])
    es.add_argument("--sizes", type=_int_list, default=list(experiments.DEFAULT_SIZES))
    es.add_argument("--trials", type=int, default=8)
    es.add_argument("--distribution", choices=experiments.DISTRIBUTIONS, default="uniform")
    ms = exs.add_parser("mantissa-sweep", parents=[common])
    ms.add_argument("--widths", type=_int_list, default=list(experiments.DEFAULT_WIDTHS))
    ms.add_argument("--sizes", type=_int_list, default=list(experiments.DEFAULT_SWEEP_SIZES))
    ms.add_argument("--trials", type=int, default=2)
    ms.add_argument("--distribution", choices=experiments.DISTRIBUTIONS, default="uniform")
    nc = exs.add_parser("noise-char", parents=[common])
    nc.add_argument("--widths", type=_int_list, default=list(experiments.DEFAULT_NOISE_WIDTHS))
    nc.add_argument("--trials", type=int, default=200)
    nc.add_argument("--dot-lengths", type=_int_list, default=list(experiments.DEFAULT_DOT_LENGTHS))
    nc.add_argument("--dot-trials", type=int, default=1000)
    nc.add_argument("--bins", type=int, default=40)

    pf = sub.add_parser("perf", parents=[common], help="analytic performance model")
    pf.add_argument("--size", type=int, default=1024, help="square GEMM size (overridden by -M/-K/-N)")
    pf.add_argument("-M", type=int)
    pf.add_argument("-K", type=int)
    pf.add_argument("-N", type=int)
    pfs = pf.add_subparsers(dest="perf_command")
    sw = pfs.add_parser("sweep-ppus", parents=[common])
    sw.add_argument("--counts", type=_int_list, default=[25, 50, 100, 200])
    sw.add_argument("--reference", type=float, default=perf.REFERENCE_DATA["gpu_rtx3060_energy_eff_gflops_w"],
                    help="reference efficiency line in GFLOPS/W")
    sw.add_argument("--size", type=int, default=1024)

    sub.add_parser("area-power", parents=[common], help="area and power breakdown")

    cal = sub.add_parser("calibrate", parents=[common], help="refit the shipped calibration constants")
    cal.add_argument("--trials", type=int, default=experiments.CALIBRATION_TRIALS)
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _seed(args, cfg: SystemConfig) -> int:
    return cfg.noise.seed if args.seed is None else args.seed


def _run(args) -> tuple:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    if seed != cfg.noise.seed:
        cfg = dataclasses.replace(cfg, noise=dataclasses.replace(cfg.noise, seed=seed))
    threads = max(1, args.threads)

    if args.command == "gemm":
        A, B = read_matrix(args.a_path), read_matrix(args.b_path)
        if A.shape[1] != B.shape[0]:
            raise ShapeError(f"A is {A.shape[0]}x{A.shape[1]} but B is {B.shape[0]}x{B.shape[1]}")
        res = matrix_multiply(A, B, cfg, threads=threads)
        if args.out:
            write_matrix(args.out, res.values)
        results = {"shape": list(res.values.shape), "dataflow": res.dataflow, "noise_path": res.noise_path}
        if res.report is not None:
            results["error"] = res.report.to_dict()
            qa = quantize_matrix(A, cfg.mantissa_bits, "row", cfg.rounding, cfg.exponent_bits)
            qb = quantize_matrix(B, cfg.mantissa_bits, "col", cfg.rounding, cfg.exponent_bits)
            try:
                results["quantization_rel_l2_bound"] = gemm_rel_l2_bound(qa, qb, A, B, res.reference)
            except PhotoGemmError:
                results["quantization_rel_l2_bound"] = None
        if not args.out:
            results["values"] = res.values
        return "gemm", {"a": args.a_path, "b": args.b_path}, cfg, seed, results

    if args.command == "experiment":
        name = args.experiment
        if name == "error-scaling":
            params = {"sizes": args.sizes, "trials": args.trials, "distribution": args.distribution}
            results = experiments.error_scaling(cfg, args.sizes, args.trials, seed, threads, args.distribution)
        elif name == "mantissa-sweep":
            params = {"widths": args.widths, "sizes": args.sizes, "trials": args.trials, "distribution": args.distribution}
            results = experiments.mantissa_sweep(cfg, args.widths, args.sizes, args.trials, seed, threads, args.distribution)
        else:
            params = {"widths": args.widths, "trials": args.trials, "dot_lengths": args.dot_lengths,
                      "dot_trials": args.dot_trials, "bins": args.bins}
            results = experiments.noise_characterization(
                cfg, args.widths, args.trials, seed, threads, args.dot_lengths, args.dot_trials, args.bins
            )
        return f"experiment {name}", params, cfg, seed, results

    if args.command == "perf":
        table = perf.load_area_power_table(cfg.area_power_table or None)
        if args.perf_command == "sweep-ppus":
            n = args.size
            reports = perf.sweep_ppus(n, n, n, cfg, args.counts, table)
            results = {
                "points": [{"num_ppus": r.num_ppus, "energy_eff_gflops_w": r.energy_eff_gflops_w,
                            "throughput_gflops": r.throughput_gflops, "power_w": r.power_w} for r in reports],
                "reference_eff_gflops_w": args.reference,
                "crossover_ppus": perf.efficiency_crossover(n, n, n, args.reference, cfg, max_ppus=max(args.counts) * 4),
                "reference_data": perf.REFERENCE_DATA,
            }
            return "perf sweep-ppus", {"size": n, "counts": args.counts}, cfg, seed, results
        M = args.M or args.size
        K = args.K or args.size
        N = args.N or args.size
        rep = perf.simulate_gemm_perf(M, K, N, cfg, table)
        return "perf", {"M": M, "K": K, "N": N}, cfg, seed, {"perf": rep.to_dict(), "reference_data": perf.REFERENCE_DATA}

    if args.command == "area-power":
        table = perf.load_area_power_table(cfg.area_power_table or None)
        return "area-power", {}, cfg, seed, perf.area_power_report(table)

    if args.command == "calibrate":
        sigma = experiments.calibrate_sigma(trials=args.trials, seed=seed)
        launch, cycles = perf.calibrate_constants(
            [(16, perf.REFERENCE_DATA["throughput_gflops"]["16"]), (1024, perf.REFERENCE_DATA["throughput_gflops"]["1024"])],
            cfg,
        )
        results = {"noise.sigma": sigma, "ppu_launch_overhead_s": launch, "digital_cycles_per_element": cycles}
        return "calibrate", {"trials": args.trials}, cfg, seed, results

    raise InvalidConfig(f"unknown command {args.command!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        command, params, cfg, seed, results = _run(args)
    except ShapeError as exc:
        print(f"photogemm: shape error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidConfig as exc:
        print(f"photogemm: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PhotoGemmError, OSError, ValueError) as exc:
        print(f"photogemm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    doc = make_report(command, cfg, seed, params, results, time.perf_counter() - start)
    text = dumps(doc, args.format)
    try:
        if command == "gemm":
            _emit(text, args.report)
        else:
            _emit(text, args.out)
    except OSError as exc:
        print(f"photogemm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
