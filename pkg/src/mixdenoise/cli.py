"""Command-line entry point: corrupt, detect, denoise, evaluate, benchmark.

Exit codes: 0 success, 1 a benchmark case failed or errored, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_config, dump_config, load_config
from .image_core import PGMError, load_pgm, mse, psnr, save_pgm
from .impulse_detect import acwmf_detect, amf_detect
from .noise_synth import NoiseKind, NoiseSpec, corrupt
from .nonlocal_prior import worker_count
from .solver import denoise_full

log = logging.getLogger("mixdenoise")

EXIT_OK = 0
EXIT_CASE_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _rate(text: str) -> float:
    val = float(text)
    if not 0.0 <= val <= 1.0:
        raise argparse.ArgumentTypeError(f"rate must lie in [0, 1], got {text}")
    return val


def _nonneg(text: str) -> float:
    val = float(text)
    if val < 0 or not math.isfinite(val):
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {text}")
    return val


def _kind(text: str) -> NoiseKind:
    try:
        return NoiseKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fmt_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def _sidecar(output: str, suffix: str) -> str:
    p = Path(output)
    return str(p.with_name(p.stem + suffix))


def _read_image(path: str) -> np.ndarray:
    try:
        return load_pgm(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except PGMError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _mask_image(mask: np.ndarray) -> np.ndarray:
    return np.where(mask, 255.0, 0.0)


# ---------------------------------------------------------------- corrupt


def cmd_corrupt(args) -> int:
    x = _read_image(args.input)
    spec = NoiseSpec(sigma=args.sigma, rate=args.rate, kind=args.kind, seed=args.seed)
    rec = corrupt(x, spec)
    mask_path = args.mask or _sidecar(args.output, ".mask.pgm")
    meta_path = args.meta or _sidecar(args.output, ".meta.txt")
    save_pgm(rec.noisy, args.output)
    save_pgm(_mask_image(rec.truth_mask), mask_path)
    with open(meta_path, "w", encoding="utf-8") as fh:
        fh.write(f"input = {args.input}\n")
        fh.write(f"sigma = {spec.sigma!r}\n")
        fh.write(f"rate = {spec.rate!r}\n")
        fh.write(f"kind = {spec.kind.value}\n")
        fh.write(f"seed = {spec.seed}\n")
        fh.write("generator = numpy PCG64 (gaussian, then impulse selector, then impulse values)\n")
        fh.write(f"corrupted = {int(rec.truth_mask.sum())}\n")
        fh.write(f"pixels = {rec.truth_mask.size}\n")
    print(f"wrote {args.output} ({int(rec.truth_mask.sum())} of {rec.truth_mask.size} pixels impulse-corrupted)")
    return EXIT_OK


# ----------------------------------------------------------------- detect


def cmd_detect(args) -> int:
    y = _read_image(args.input)
    if args.kind is NoiseKind.SALT_PEPPER:
        if args.wmax < 3 or args.wmax % 2 == 0:
            raise UsageError("--wmax must be odd and >= 3")
        mask = amf_detect(y, args.wmax)
    else:
        mask = acwmf_detect(y, args.delta_factor)
    save_pgm(_mask_image(mask), args.output)
    n_sus = int(mask.sum())
    print(f"suspect: {n_sus}")
    print(f"reliable: {mask.size - n_sus}")
    print(f"total: {mask.size}")
    return EXIT_OK


# ---------------------------------------------------------------- denoise


def _solver_config(args):
    values = {}
    if getattr(args, "config", None):
        try:
            values = load_config(args.config)
        except FileNotFoundError:
            raise UsageError(f"no such config file: {args.config}") from None
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
    try:
        return build_config(values, sigma=getattr(args, "sigma", None), kind=getattr(args, "kind", None))
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def format_trace(trace: list[dict]) -> str:
    out = io.StringIO()
    out.write("# outer inner objective rms_x_minus_u rms_x_minus_w suspect seconds\n")
    for t in trace:
        out.write(
            f"{t['outer']} {t['inner']} {t['objective']:.6f} {t['x_minus_u']:.6e} "
            f"{t['x_minus_w']:.6e} {t['suspect']} {t['seconds']:.3f}\n"
        )
    return out.getvalue()


def cmd_denoise(args) -> int:
    y = _read_image(args.input)
    cfg = _solver_config(args)
    try:
        cfg.nonlocal_cfg.validate_for(y.shape)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    t0 = time.perf_counter()
    res = denoise_full(y, cfg, trace=args.trace is not None)
    elapsed = time.perf_counter() - t0
    save_pgm(res.image, args.output)
    if args.trace is not None:
        text = format_trace(res.trace)
        if args.trace == "-":
            sys.stdout.write(text)
        else:
            Path(args.trace).write_text(text, encoding="utf-8")
    print(f"wrote {args.output} in {elapsed:.1f} s ({int(res.masks[-1].sum())} suspect pixels)")
    return EXIT_OK


# --------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    ref = _read_image(args.reference)
    test = _read_image(args.test)
    if ref.shape != test.shape:
        raise UsageError(f"size mismatch: {ref.shape[1]}x{ref.shape[0]} vs {test.shape[1]}x{test.shape[0]}")
    print(f"MSE: {mse(ref, test):.6f}")
    value = psnr(ref, test)
    print("PSNR: inf" if math.isinf(value) else f"PSNR: {value:.2f} dB")
    return EXIT_OK


# -------------------------------------------------------------- benchmark


@dataclass
class BenchmarkCase:
    image: str
    kind: NoiseKind
    rate: float
    sigma: float
    seed: int
    min_psnr: float | None = None


def parse_suite(text: str, base_dir: str | os.PathLike = ".") -> list[BenchmarkCase]:
    """Parse ``image, kind, rate, sigma, seed[, min_psnr]`` lines; ``#`` comments."""
    cases = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (5, 6):
            raise UsageError(f"suite line {lineno}: expected 5 or 6 comma-separated fields")
        try:
            image = parts[0]
            if not os.path.isabs(image):
                image = os.path.normpath(os.path.join(base_dir, image))
            case = BenchmarkCase(
                image=image,
                kind=NoiseKind.parse(parts[1]),
                rate=float(parts[2]),
                sigma=float(parts[3]),
                seed=int(parts[4]),
                min_psnr=float(parts[5]) if len(parts) == 6 and parts[5] else None,
            )
            NoiseSpec(case.sigma, case.rate, case.kind, case.seed)
        except ValueError as exc:
            raise UsageError(f"suite line {lineno}: {exc}") from None
        cases.append(case)
    return cases


def run_case(case: BenchmarkCase, config_values: dict, figures: str | None = None, index: int = 0) -> dict:
    """Corrupt, denoise and score one case; errors become a row, not an exception."""
    row = {
        "image": Path(case.image).stem,
        "kind": case.kind.value,
        "rate": case.rate,
        "sigma": case.sigma,
        "seed": case.seed,
        "noisy_psnr": None,
        "denoised_psnr": None,
        "runtime_s": None,
        "min_psnr": case.min_psnr,
        "status": "ok",
        "error": "",
    }
    try:
        x = load_pgm(case.image)
        rec = corrupt(x, NoiseSpec(case.sigma, case.rate, case.kind, case.seed))
        cfg = build_config(config_values, sigma=case.sigma, kind=case.kind)
        t0 = time.perf_counter()
        res = denoise_full(rec.noisy, cfg)
        row["runtime_s"] = time.perf_counter() - t0
        row["noisy_psnr"] = psnr(x, rec.noisy)
        row["denoised_psnr"] = psnr(x, res.image)
        if case.min_psnr is not None:
            row["status"] = "pass" if row["denoised_psnr"] >= case.min_psnr else "fail"
        if figures:
            from .report import case_panel

            name = f"{index:02d}_{row['image']}_{row['kind']}_{round(100 * case.rate)}.png"
            case_panel(
                x, rec.noisy, res.image, os.path.join(figures, name),
                title=f"{row['image']}, sigma={case.sigma:g}, {row['kind']} r={case.rate:g}",
                psnrs={"noisy": row["noisy_psnr"], "restored": row["denoised_psnr"]},
            )
    except Exception as exc:  # noqa: BLE001 - a bad case must not sink the suite
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


REPORT_COLUMNS = ["image", "kind", "r", "noisy_psnr", "denoised_psnr", "runtime_s", "min_psnr", "status", "error"]


def format_report(rows: list[dict], header_lines: list[str]) -> str:
    out = io.StringIO()
    for line in header_lines:
        out.write(f"# {line}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)

    def num(v, fmt):
        return "" if v is None else ("inf" if math.isinf(v) else format(v, fmt))

    for r in rows:
        writer.writerow(
            [
                r["image"], r["kind"], f"{r['rate']:g}",
                num(r["noisy_psnr"], ".2f"), num(r["denoised_psnr"], ".2f"),
                num(r["runtime_s"], ".1f"), num(r["min_psnr"], ".2f"),
                r["status"], r["error"],
            ]
        )
    return out.getvalue()


def cmd_benchmark(args) -> int:
    try:
        suite_text = Path(args.suite).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"no such suite file: {args.suite}") from None
    cases = parse_suite(suite_text, Path(args.suite).parent)
    values = {}
    if args.config:
        try:
            values = load_config(args.config)
        except (FileNotFoundError, ConfigError) as exc:
            raise UsageError(str(exc)) from None
    if args.figures:
        os.makedirs(args.figures, exist_ok=True)

    jobs = max(1, min(args.jobs, len(cases))) if cases else 1
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            futures = [ex.submit(run_case, c, values, args.figures, i) for i, c in enumerate(cases)]
            rows = [f.result() for f in futures]
    else:
        rows = [run_case(c, values, args.figures, i) for i, c in enumerate(cases)]

    header = [f"mixdenoise {__version__} benchmark", f"suite = {args.suite}", f"cases = {len(cases)}"]
    header += dump_config(build_config(values))
    report = format_report(rows, header)
    if args.output:
        Path(args.output).write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    if args.figures and rows:
        from .report import psnr_bars

        psnr_bars(rows, os.path.join(args.figures, "psnr_summary.png"))
    bad = [r for r in rows if r["status"] in ("fail", "error")]
    return EXIT_CASE_FAILURE if bad else EXIT_OK


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mixdenoise", description="Mixed Gaussian-impulse noise removal for grayscale PGM images.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("corrupt", help="add Gaussian then impulse noise")
    c.add_argument("--input", required=True)
    c.add_argument("--output", required=True)
    c.add_argument("--sigma", type=_nonneg, required=True)
    c.add_argument("--rate", type=_rate, required=True)
    c.add_argument("--kind", type=_kind, default=NoiseKind.SALT_PEPPER, help="sp or rv")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--mask", help="ground-truth mask path (default: <output>.mask.pgm)")
    c.add_argument("--meta", help="metadata path (default: <output>.meta.txt)")
    c.set_defaults(func=cmd_corrupt)

    d = sub.add_parser("detect", help="write an impulse-suspect mask")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--kind", type=_kind, default=NoiseKind.SALT_PEPPER)
    d.add_argument("--wmax", type=int, default=39)
    d.add_argument("--delta-factor", type=_nonneg, default=1.0)
    d.set_defaults(func=cmd_detect)

    n = sub.add_parser("denoise", help="restore a noisy image")
    n.add_argument("--input", required=True)
    n.add_argument("--output", required=True)
    n.add_argument("--sigma", type=_nonneg, required=True)
    n.add_argument("--kind", type=_kind, default=NoiseKind.SALT_PEPPER)
    n.add_argument("--config")
    n.add_argument("--trace", nargs="?", const="-", default=None,
                   help="per-iteration objective log (to PATH, or stdout)")
    n.set_defaults(func=cmd_denoise)

    e = sub.add_parser("evaluate", help="MSE and PSNR between two images")
    e.add_argument("reference")
    e.add_argument("test")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", help="run a suite of corrupt/denoise cases")
    b.add_argument("suite")
    b.add_argument("--output", help="also write the CSV report here")
    b.add_argument("--figures", help="directory for per-case panels and a PSNR summary chart")
    b.add_argument("--config")
    b.add_argument("--jobs", type=int, default=worker_count())
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mixdenoise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mixdenoise: error: {exc}", file=sys.stderr)
        return EXIT_CASE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
