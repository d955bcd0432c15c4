"""zkt command line: setup, compile, prove, verify, inspect.

Exit codes: 0 success/accept, 1 I/O or processing failure, 2 usage error,
3 unsupported layer, 4 verification reject, 5 artifact mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .errors import FormatError, MismatchError, UnsupportedOperatorError, ZktError

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_UNSUPPORTED, EXIT_REJECT, EXIT_MISMATCH = range(6)
COMPILED_FORMAT = "zkt-compiled/1"
SCALE_RANGE = (4, 12)

log = logging.getLogger("zkt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2) on its own; keep control here
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from None


def _srs_path(args) -> str:
    path = args.srs or os.environ.get("ZKT_SRS")
    if not path:
        raise UsageError("an SRS path is required (--srs or the ZKT_SRS environment variable)")
    return path


def _load_srs(args):
    from .pcs.kzg import load_srs

    return load_srs(_srs_path(args))


def _load_compiled(path: str):
    from .transpiler.dag import BlockDag

    d = _read_json(path)
    if d.get("format") != COMPILED_FORMAT:
        raise FormatError(f"{path}: not a compiled model ({COMPILED_FORMAT})")
    return BlockDag.from_json(d["dag"])


# subcommands --------------------------------------------------------------------

def cmd_setup(args) -> int:
    from .pcs.kzg import save_srs, setup, test_mode

    if args.degree < 1:
        raise UsageError("--degree must be a positive integer")
    if args.seed is not None and not test_mode():
        log.warning("--seed is only honoured in test mode; using fresh randomness")
        args.seed = None
    seed = args.seed.encode() if args.seed is not None else os.urandom(32)
    srs = setup(seed, args.degree)
    save_srs(srs, args.output)
    print(f"wrote SRS of degree {args.degree} to {args.output}")
    return EXIT_OK


def cmd_compile(args) -> int:
    from .compiler.graph import load_model
    from .compiler.rules import RewriteReport, apply_rules
    from .fileio import atomic_write
    from .transpiler.lower import lower

    g = load_model(args.model)
    rep = RewriteReport(len(g.nodes), len(g.nodes))
    opt = g.copy() if args.no_rewrite else apply_rules(g, report=rep)
    dag, plan = lower(opt, args.scale_bits, args.max_table_bits)
    out = {
        "format": COMPILED_FORMAT,
        "scale_bits": args.scale_bits,
        "rewrites": {"nodes_before": rep.nodes_before, "nodes_after": rep.nodes_after, "applied": rep.applied},
        "graph": opt.to_json(),
        "dag": dag.to_json(),
        "tables": plan.to_json(),
    }
    atomic_write(args.output, json.dumps(out).encode())
    note = " (unchanged)" if not rep.applied else ""
    print(f"nodes: {rep.nodes_before} → {rep.nodes_after}{note}")
    counts = ", ".join(f"{k} {v}" for k, v in sorted(dag.kind_counts().items()))
    print(f"blocks: {counts or 'none'}")
    sizes = ", ".join(f"{k} 2^{t.size.bit_length() - 1}" for k, t in sorted(plan.tables.items()))
    print(f"tables: {sizes or 'none'}")
    return EXIT_OK


def _inputs(path: str) -> tuple[dict, bool]:
    d = _read_json(path)
    quantized = bool(d.pop("quantized", False)) if isinstance(d, dict) else False
    vals = d.get("inputs", d) if isinstance(d, dict) else None
    if not isinstance(vals, dict):
        raise FormatError(f"{path}: expected an object mapping input names to arrays")
    return {k: np.asarray(v, dtype=object if quantized else float) for k, v in vals.items()}, quantized


def cmd_prove(args) -> int:
    from .fileio import atomic_write
    from .runtime import generate_witness, prove_model, serialize_bundle

    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    dag = _load_compiled(args.compiled)
    inputs, quantized = _inputs(args.inputs)
    srs = _load_srs(args)
    store = generate_witness(dag, inputs, srs, args.workers, quantized=quantized)
    timings: dict = {}
    bundle = prove_model(dag, store, srs, args.workers, seed=(args.seed or "").encode(), timings=timings)
    data = serialize_bundle(bundle)
    io_path = args.io or args.output + ".io.json"
    atomic_write(args.output, data)
    atomic_write(io_path, json.dumps(bundle.io.to_json()).encode())
    print(f"wrote {len(data)} bytes to {args.output} and public I/O to {io_path} ({timings['total']:.2f}s)")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .runtime import PublicIO, deserialize_bundle, verify_model

    dag = _load_compiled(args.compiled)
    srs = _load_srs(args)
    with open(args.proof, "rb") as fh:
        data = fh.read()
    io = PublicIO.from_json(_read_json(args.io)) if args.io else None
    try:
        bundle = deserialize_bundle(data)
    except FormatError as exc:
        print(f"reject: component bundle-format: {exc}")
        return EXIT_REJECT
    rep = verify_model(dag, bundle, srs, io)
    if args.verbose:
        for c in rep.components:
            print(f"  {'ok ' if c.ok else 'BAD'} {c.name}" + (f": {c.detail}" if c.detail else ""))
    if rep.ok:
        print(f"accept ({len(rep.components)} components checked, {rep.timing['total']:.2f}s)")
        return EXIT_OK
    c = rep.first_failure
    print(f"reject: component {c.name}" + (f": {c.detail}" if c.detail else ""))
    return EXIT_REJECT


def cmd_inspect(args) -> int:
    from .runtime import deserialize_bundle

    with open(args.proof, "rb") as fh:
        data = fh.read()
    b = deserialize_bundle(data)
    print(f"bundle {args.proof}: {len(data)} bytes, scale_bits {b.scale_bits}, "
          f"model {b.dag_digest.hex()[:16]}, srs {b.srs_digest.hex()[:16]}")
    for r in b.size_report():
        print(f"  {r['kind']}: depth {r['depth']}, leaves {r['leaves']}, accumulator {r['accumulator_elements']} "
              f"group elements ({r['accumulator_bytes']} B), tree {r['tree_bytes']} B")
    kinds: dict[str, int] = {}
    for p in b.standalone:
        kinds[p.kind.value] = kinds.get(p.kind.value, 0) + 1
    if kinds:
        print("  standalone: " + ", ".join(f"{k} x{v}" for k, v in sorted(kinds.items())))
    return EXIT_OK


# argument parsing ---------------------------------------------------------------

def _scale_bits(v: str) -> int:
    try:
        s = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: {v!r}") from None
    if not SCALE_RANGE[0] <= s <= SCALE_RANGE[1]:
        raise argparse.ArgumentTypeError(f"scale bits must lie in [{SCALE_RANGE[0]}, {SCALE_RANGE[1]}]")
    return s


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zkt", description="Compile, prove and verify quantized models.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("setup", help="generate an SRS (test mode)")
    s.add_argument("--seed")
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(fn=cmd_setup)

    c = sub.add_parser("compile", help="rewrite and lower a model graph")
    c.add_argument("model")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--scale-bits", type=_scale_bits, default=6)
    c.add_argument("--max-table-bits", type=int, default=18)
    c.add_argument("--no-rewrite", action="store_true")
    c.set_defaults(fn=cmd_compile)

    pr = sub.add_parser("prove", help="prove one inference")
    pr.add_argument("compiled")
    pr.add_argument("inputs")
    pr.add_argument("--srs")
    pr.add_argument("-o", "--output", required=True)
    pr.add_argument("--io", help="public I/O output path (default: <proof>.io.json)")
    pr.add_argument("--workers", type=int, default=1)
    pr.add_argument("--seed")
    pr.set_defaults(fn=cmd_prove)

    v = sub.add_parser("verify", help="verify a proof bundle")
    v.add_argument("compiled")
    v.add_argument("proof")
    v.add_argument("io", nargs="?")
    v.add_argument("--srs")
    v.set_defaults(fn=cmd_verify)

    i = sub.add_parser("inspect", help="describe a proof bundle")
    i.add_argument("proof")
    i.set_defaults(fn=cmd_inspect)
    p._subs = {"setup": s, "compile": c, "prove": pr, "verify": v, "inspect": i}
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            raise UsageError(parser.format_usage().rstrip())
        logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else
                            logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "seed", None) is not None and args.fn is cmd_prove:
            from .pcs.kzg import test_mode

            if not test_mode():
                log.warning("--seed is only honoured in test mode")
                args.seed = None
        return args.fn(args)
    except UsageError as exc:
        msg = str(exc)
        if not msg.startswith("usage"):
            sp = getattr(parser, "_subs", {}).get(getattr(args, "command", None), parser)
            msg = f"{sp.format_usage()}{sp.prog}: error: {msg}"
        print(msg, file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedOperatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for n in exc.nodes:
            print(f"  unsupported: {n}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except MismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OSError, ZktError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
