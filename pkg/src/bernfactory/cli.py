"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 construction or mathematical
failure, 3 I/O or data-contract failure.  Every command writes a
``<output>.run.json`` sidecar recording parameters, seeds, input hashes
and timing; the primary outputs themselves are deterministic.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bernstein import delta_n
from .counterexample import build_counterexample, divergence_report, m0, rate_sweep
from .envelope import LadderParams, build_envelopes, ladder_from_json, rungs_to_params
from .errors import (
    ArgumentError,
    BernFactoryError,
    ConstructionFailure,
    ContractError,
    DomainError,
    EmptyConstructionError,
    LadderConsistencyError,
    PrecisionError,
    RangeViolation,
)
from .simulator import FairCoin, NestedUnitEngine, PCoin, ReplayCoin, monte_carlo_tails, tail_stats_to_csv
from .target import check_alpha, get_target, load_piecewise_power

log = logging.getLogger("bernfactory")

EXIT_OK, EXIT_USAGE, EXIT_MATH, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _power_of_two(text: str) -> int:
    try:
        value = 2 ** int(text[2:]) if text.startswith("2^") else int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if value < 1 or value & (value - 1):
        raise argparse.ArgumentTypeError(f"{text} is not a power of 2")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bernfactory", description="Certified Bernoulli factories from Bernstein envelope ladders.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="{build,simulate,tails,counterexample}", parser_class=_Parser)

    b = sub.add_parser("build", help="construct and certify an envelope ladder")
    b.add_argument("--target", default="linear", help="catalog identifier")
    b.add_argument("--target-file", help="JSON piecewise-power target {center, exponent, scale, offset}")
    b.add_argument("--alpha", type=_fraction, help="smoothness exponent as p/q (default: the target's)")
    b.add_argument("--n0", type=int)
    b.add_argument("--b", type=int)
    b.add_argument("--levels", type=int)
    b.add_argument("--rungs", type=_int_list, help="explicit geometric rung list, e.g. 16,64,256")
    b.add_argument("--theta", type=_fraction)
    b.add_argument("--D", type=_fraction, dest="D")
    b.add_argument("--out", help="ladder manifest path (default stdout)")

    s = sub.add_parser("simulate", help="draw f(p)-coin tosses from a ladder")
    s.add_argument("manifest")
    s.add_argument("--p", type=float, help="bias of the simulated p-coin")
    s.add_argument("--p-bits", help="replay file for the p-coin")
    s.add_argument("--fair-bits", help="replay file for the fair coin")
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--transcript", action="store_true", help="include per-stage transcripts")
    s.add_argument("--out")

    t = sub.add_parser("tails", help="Monte Carlo survival curves P_p(N > n)")
    t.add_argument("manifest")
    t.add_argument("--p", type=_float_list, default=[0.1, 0.3, 0.5, 0.7, 0.9])
    t.add_argument("--reps", type=int, default=100000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--threads", type=int, default=1)
    t.add_argument("--format", choices=("json", "csv"), default="json")
    t.add_argument("--out")

    c = sub.add_parser("counterexample", help="rate sweep and divergence report for the theta-function target")
    c.add_argument("--alpha", type=_fraction, default=Fraction(1, 2))
    c.add_argument("--m-max", type=_power_of_two, default=2**80, help="largest scale, e.g. 2^80")
    c.add_argument("--grid", type=int, default=513)
    c.add_argument("--out", default=".", help="output directory")
    return parser


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _sidecar(out: str | None, record: dict) -> None:
    if out is None:
        return
    base = Path(out)
    side = base / "run.json" if base.is_dir() else base.with_name(base.name + ".run.json")
    side.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _run_record(command: str, parameters: dict, started: float, inputs=None, outputs=None, seeds=None) -> dict:
    return {
        "command": command,
        "parameters": parameters,
        "seeds": seeds or [],
        "inputs": inputs or {},
        "outputs": outputs or [],
        "versions": {
            "bernfactory": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_clock_seconds": round(time.time() - started, 3),
    }


def _load_manifest(path: str):
    try:
        raw = Path(path).read_bytes()
        obj = json.loads(raw)
    except (OSError, ValueError) as exc:
        raise ContractError(f"cannot read manifest {path}: {exc}") from exc
    return ladder_from_json(obj), _sha256(raw)


def cmd_build(args) -> int:
    started = time.time()
    if args.target_file:
        target = load_piecewise_power(args.target_file)
    else:
        target = get_target(args.target)
    alpha = args.alpha if args.alpha is not None else target.alpha
    check_alpha(alpha)
    overrides = {k: getattr(args, k) for k in ("theta", "D") if getattr(args, k) is not None}
    if args.rungs:
        params = rungs_to_params(args.rungs, alpha, **overrides)
    else:
        shape = {k: getattr(args, k) for k in ("n0", "b", "levels") if getattr(args, k) is not None}
        params = LadderParams(alpha=alpha, **shape, **overrides)
    ladder = build_envelopes(target, params)
    text = json.dumps(ladder.to_json(), indent=1, sort_keys=True) + "\n"
    _write(args.out, text)
    _sidecar(
        args.out,
        _run_record(
            "build",
            {"target": target.identifier, "params": params.to_json()},
            started,
            {"target_file": args.target_file} if args.target_file else {},
            [{"path": args.out, "sha256": _sha256(text.encode())}],
        ),
    )
    if not ladder.certification.ok:
        return EXIT_MATH
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    ladder, digest = _load_manifest(args.manifest)
    engine = NestedUnitEngine.from_pairs(ladder.pairs)
    if args.p_bits:
        p_source = ReplayCoin.from_file(args.p_bits)
    elif args.p is not None:
        if not 0 <= args.p <= 1:
            raise UsageError("--p must lie in [0, 1]")
        p_source = PCoin(args.p, args.seed)
    else:
        raise UsageError("need --p or --p-bits")
    fair_source = ReplayCoin.from_file(args.fair_bits) if args.fair_bits else FairCoin(args.seed + 1)
    results = []
    for _ in range(args.reps):
        res = engine.run_bits(p_source, fair_source)
        item = {"output": res.output, "tosses": res.tosses, "timed_out": res.timed_out}
        if args.transcript:
            item["transcript"] = [vars(step) for step in res.transcript]
        results.append(item)
    text = json.dumps({"manifest_sha256": digest, "p": args.p, "seed": args.seed, "results": results}, indent=1) + "\n"
    _write(args.out, text)
    _sidecar(
        args.out,
        _run_record(
            "simulate",
            {"p": args.p, "reps": args.reps},
            started,
            {"manifest": {"path": args.manifest, "sha256": digest}},
            [{"path": args.out, "sha256": _sha256(text.encode())}],
            [args.seed],
        ),
    )
    return EXIT_OK


def _predictions(ladder, ps) -> dict:
    """Certified gaps and Δ_n(p)^α per rung, keyed by p."""
    alpha = ladder.params.alpha
    out = {}
    for p in ps:
        x = Fraction(p)
        rows = []
        for pair in ladder.pairs:
            gap = pair.gap()(x)
            lo, hi = delta_n(x, pair.level, 64)
            rows.append({"n": pair.level, "certified_gap": float(gap), "delta_pow_alpha": float(hi) ** float(alpha)})
        out[p] = rows
    return out


def cmd_tails(args) -> int:
    started = time.time()
    if args.reps < 1:
        raise UsageError("--reps must be positive")
    if any(not 0 <= p <= 1 for p in args.p):
        raise UsageError("every --p must lie in [0, 1]")
    ladder, digest = _load_manifest(args.manifest)
    stats = monte_carlo_tails(ladder, args.p, args.reps, args.seed, args.threads)
    stats.source = digest
    preds = _predictions(ladder, args.p)
    if args.format == "csv":
        rows = list(csv.DictReader(io.StringIO(tail_stats_to_csv(stats))))
        buf = io.StringIO()
        fields = ["p", "n", "survivors", "replications", "lower", "upper", "certified_gap", "delta_pow_alpha"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            pred = next(r for r in preds[float(row["p"])] if r["n"] == int(row["n"]))
            writer.writerow({**row, "certified_gap": f"{pred['certified_gap']:.8g}", "delta_pow_alpha": f"{pred['delta_pow_alpha']:.8g}"})
        text = buf.getvalue()
    else:
        obj = stats.to_json()
        obj["manifest_sha256"] = digest
        for curve in obj["curves"]:
            curve["predictions"] = preds[curve["p"]]
        text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    _write(args.out, text)
    slopes = {str(c.p): c.slope() for c in stats.curves}
    _sidecar(
        args.out,
        _run_record(
            "tails",
            {"p": args.p, "reps": args.reps, "threads": args.threads, "format": args.format, "slopes": slopes},
            started,
            {"manifest": {"path": args.manifest, "sha256": digest}},
            [{"path": args.out, "sha256": _sha256(text.encode())}],
            [args.seed],
        ),
    )
    return EXIT_OK


def cmd_counterexample(args) -> int:
    started = time.time()
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    cx = build_counterexample(args.alpha, args.m_max)
    rows = rate_sweep(cx, points=args.grid)
    report = divergence_report(cx)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rate = io.StringIO()
    w = csv.writer(rate, lineterminator="\n")
    w.writerow(["n", "sup_error", "scaled_error"])
    for r in rows:
        w.writerow([r.n, f"{r.sup_error + r.lemma_bound:.12g}", f"{r.scaled:.12g}"])
    div = io.StringIO()
    w = csv.writer(div, lineterminator="\n")
    w.writerow(["m", "h_m", "probe_quotient", "predicted_lower_bound"])
    for m, h, q, lb in zip(report.scales, report.h, report.quotients, report.predicted):
        w.writerow([m, f"{h:.12g}", f"{q:.12g}", f"{lb:.12g}"])
    (out / "rate.csv").write_text(rate.getvalue())
    (out / "divergence.csv").write_text(div.getvalue())
    _sidecar(
        str(out),
        _run_record(
            "counterexample",
            {"alpha": str(args.alpha), "m_max": args.m_max, "m0": m0(args.alpha), "grid": args.grid},
            started,
            outputs=[
                {"path": str(out / "rate.csv"), "sha256": _sha256(rate.getvalue().encode())},
                {"path": str(out / "divergence.csv"), "sha256": _sha256(div.getvalue().encode())},
            ],
        ),
    )
    return EXIT_OK


COMMANDS = {"build": cmd_build, "simulate": cmd_simulate, "tails": cmd_tails, "counterexample": cmd_counterexample}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ArgumentError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConstructionFailure, RangeViolation, PrecisionError, EmptyConstructionError, LadderConsistencyError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_MATH
    except (ContractError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BernFactoryError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
