"""Command-line harness.

Subcommands: gen-weights, gen-seq, verify, bench, traffic. The bench
subcommand refuses to time anything until the same configuration has been
verified in the same invocation (or --skip-verify is passed). Exit codes:
0 success, 1 verification failure, 2 invalid arguments, 3 I/O error.

When weights and inputs are generated rather than loaded, the weight
stream uses --seed and the input stream uses --seed + 1 so the two are
independent.
"""

import argparse
import sys

from . import bench as bench_mod
from .bench import ORACLE_TOLERANCE, bench, emit_csv, format_summary_table, verify
from .cells import CellKind
from .model_io import (
    FileFormatError,
    PRESETS,
    RnnConfig,
    generate_sequence,
    generate_weights,
    load_sequence,
    load_weights,
    save_sequence,
    save_weights,
)
from .traffic import MODEL_ASSUMPTION, estimate_traffic

DEFAULT_BLOCKS = "1,2,4,8,16,32,64,128"


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _parse_blocks(text):
    try:
        blocks = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"invalid block list {text!r}", 2) from None
    if not blocks or any(b < 1 for b in blocks):
        raise CliError("block sizes must be positive integers", 2)
    return blocks


def _add_model_args(p, need_cell=True):
    p.add_argument("--cell", choices=["lstm", "sru", "qrnn"], required=need_cell)
    p.add_argument("--preset", choices=["small", "large"], default="small")
    p.add_argument("--width", type=int, help="override the preset width (d_in == d_h)")
    p.add_argument("--precision", choices=["f32", "f64"], default="f32")
    p.add_argument("--seed", type=int, default=42)


def build_parser():
    parser = argparse.ArgumentParser(prog="rnnblock")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-weights", help="generate a weight file")
    _add_model_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-seq", help="generate an input-sequence file")
    p.add_argument("--seq-len", type=int, default=1024)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--precision", choices=["f32", "f64"], default="f32")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="check blocked against stepwise execution")
    _add_model_args(p)
    p.add_argument("--seq-len", type=int, default=1024)
    p.add_argument("--blocks", default=DEFAULT_BLOCKS)
    p.add_argument("--weights", help="load weights instead of generating")
    p.add_argument("--input", help="load the input sequence instead of generating")

    p = sub.add_parser("bench", help="time runs across block sizes")
    _add_model_args(p)
    p.add_argument("--seq-len", type=int, default=1024)
    p.add_argument("--blocks", default=DEFAULT_BLOCKS)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--weights", help="load weights instead of generating")
    p.add_argument("--input", help="load the input sequence instead of generating")
    p.add_argument("--out", help="summary CSV path; raw records go to *.raw.csv")
    p.add_argument("--skip-verify", action="store_true")

    p = sub.add_parser("traffic", help="emit the weight-traffic model")
    _add_model_args(p)
    p.add_argument("--seq-len", type=int, default=1024)
    p.add_argument("--blocks", default=DEFAULT_BLOCKS)
    p.add_argument("--out")
    return parser


def _config(args) -> RnnConfig:
    kind = CellKind.parse(args.cell)
    if args.width is not None:
        width = args.width
    else:
        width = PRESETS[f"{args.cell}-{args.preset}"][1]
    try:
        return RnnConfig(kind=kind, d_in=width, d_h=width, precision=args.precision)
    except ValueError as e:
        raise CliError(str(e), 2) from None


def _load_model(args, cfg):
    if args.weights:
        ws = load_weights(args.weights)
        if ws.kind is not cfg.kind or ws.precision != cfg.precision:
            raise CliError(f"{args.weights} holds a {ws.precision} {ws.kind.value} "
                           f"model, not {cfg.precision} {cfg.kind.value}", 2)
        if ws.layers[0].d_in != cfg.d_in or ws.layers[0].d_h != cfg.d_h:
            raise CliError(f"{args.weights} width does not match the configuration", 2)
    else:
        ws = generate_weights(cfg, args.seed)
    if args.input:
        X = load_sequence(args.input)
        if X.shape[1] != cfg.d_in:
            raise CliError(f"{args.input} width {X.shape[1]} does not match d_in={cfg.d_in}", 2)
        if X.dtype != cfg.dtype:
            raise CliError(f"{args.input} precision does not match {cfg.precision}", 2)
    else:
        X = generate_sequence(args.seq_len, cfg.d_in, args.seed + 1, cfg.precision)
    return ws, X


def _print_verify(report):
    for row in report.rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"verify block={row.block:<4d} max|diff|={row.max_abs_diff:.3e} "
              f"tol={row.tolerance:.0e} {status}")


def _raw_path(out):
    return out[:-4] + ".raw.csv" if out.endswith(".csv") else out + ".raw.csv"


def cmd_gen_weights(args):
    cfg = _config(args)
    save_weights(generate_weights(cfg, args.seed), args.out)
    print(f"wrote {cfg.precision} {cfg.kind.value} weights (d={cfg.d_h}) to {args.out}")
    return 0


def cmd_gen_seq(args):
    X = generate_sequence(args.seq_len, args.width, args.seed, args.precision)
    save_sequence(X, args.out)
    print(f"wrote {args.seq_len}x{args.width} {args.precision} sequence to {args.out}")
    return 0


def cmd_verify(args):
    cfg = _config(args)
    ws, X = _load_model(args, cfg)
    report = verify(cfg, ws, X, _parse_blocks(args.blocks))
    _print_verify(report)
    return 0 if report.passed else 1


def cmd_bench(args):
    cfg = _config(args)
    ws, X = _load_model(args, cfg)
    blocks = _parse_blocks(args.blocks)
    if args.skip_verify:
        print("verification skipped")
    else:
        report = verify(cfg, ws, X, blocks)
        _print_verify(report)
        if not report.passed:
            print("refusing to time an unverified configuration", file=sys.stderr)
            return 1
    result = bench(cfg, ws, X, blocks, repeats=args.repeats, threads=args.threads)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(format_summary_table(result.summaries))
    if args.out:
        emit_csv(result.summaries, args.out, kind="summary")
        emit_csv(result.records, _raw_path(args.out), kind="records")
        print(f"wrote {args.out} and {_raw_path(args.out)}")
    return 0


def cmd_traffic(args):
    cfg = _config(args)
    reports = [estimate_traffic(cfg, args.seq_len, T) for T in _parse_blocks(args.blocks)]
    print(f"model assumption: {MODEL_ASSUMPTION}")
    for r in reports:
        print(f"T={r.block_size:<4d} blocks={r.blocks:<5d} "
              f"est={r.est_weight_traffic:>14,d} B  ratio_vs_T1={r.ratio_vs_t1:.6f}")
    if args.out:
        emit_csv(reports, args.out, kind="traffic")
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "gen-weights": cmd_gen_weights,
    "gen-seq": cmd_gen_seq,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "traffic": cmd_traffic,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (FileFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
