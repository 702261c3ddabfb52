"""``sbpyolo`` command line: analyze, forward, gradcheck and eval.

Exit codes: 0 success, 1 a check failed, 2 bad input (diagnostic on stderr).
Every run writes ``manifest.json`` next to its outputs.
"""

import argparse
import contextlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .cost import analyze, format_report, format_table
from .detector import with_input_size
from .evaluation import evaluate_files, format_eval_lines, format_eval_table
from .exceptions import SBPError
from .gradcheck import REL_TOL, check_gradients, format_sweep, offset_sweep, sweep_is_smooth
from .graph import WeightStore, forward, infer_shapes, load_config
from .resources import resolve_config

DEFAULT_SEED = 0


class CheckFailed(Exception):
    pass


def _write(out_dir, name, text):
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _manifest(args, out_dir, outputs, inputs=(), conventions=()):
    manifest = {
        "subcommand": args.command,
        "inputs": list(inputs),
        "seed": args.seed,
        "threads": args.threads,
        "conventions": list(conventions),
        "outputs": [os.path.basename(p) for p in outputs],
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return _write(out_dir, "manifest.json", json.dumps(manifest, indent=2) + "\n")


def _load_graph(cfg, size):
    graph = load_config(resolve_config(cfg))
    if size is not None:
        graph = with_input_size(graph, size)
    return infer_shapes(graph)


def cmd_analyze(args, out_dir):
    path = resolve_config(args.config)
    graph = _load_graph(path, args.input)
    report = analyze(graph)
    outputs = [
        _write(out_dir, "cost_report.txt", format_report(report)),
        _write(out_dir, "cost_table.txt", format_table(report)),
    ]
    print(format_table(report), end="")
    return outputs, [path], ["1 MAC = 2 FLOPs", "1 MAC = 1 FLOP"]


def _describe(arr):
    return f"mean={arr.mean():.6e} std={arr.std():.6e} min={arr.min():.6e} max={arr.max():.6e}"


def cmd_forward(args, out_dir):
    path = resolve_config(args.config)
    graph = _load_graph(path, args.input)
    if args.weights:
        blob, manifest = args.weights
        weights = WeightStore.load(blob, manifest)
    else:
        weights = WeightStore.initialize(graph, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal((args.batch, *graph.input_shape))
    result, values = forward(graph, x, weights, return_all=True)

    lines = [f"# input {'x'.join(map(str, x.shape))} seed {args.seed}", "# node kind shape"]
    for node in graph.nodes:
        out = values[node.id]
        if isinstance(out, list):
            shape = " ".join("x".join(map(str, o.shape)) for o in out)
        else:
            shape = "x".join(map(str, out.shape))
        lines.append(f"{node.id} {node.kind} {shape}")
    heads = result if isinstance(result, list) else [result]
    for i, out in enumerate(heads):
        lines.append(f"head {i} {'x'.join(map(str, out.shape))} {_describe(out)}")
    outputs = [_write(out_dir, "forward.txt", "\n".join(lines) + "\n")]
    if args.save_weights:
        blob = os.path.join(out_dir, "weights.bin")
        manifest = os.path.join(out_dir, "weights.txt")
        weights.save(blob, manifest)
        outputs += [blob, manifest]
    for i, out in enumerate(heads):
        print(f"head {i}: {out.shape[1]} x {out.shape[2]} x {out.shape[3]}")
    return outputs, [path], []


def cmd_gradcheck(args, out_dir):
    alphas = (args.alpha,) if args.alpha is not None else (0.0, 0.5, 1.0)
    result = check_gradients(args.n_trials, args.seed, alphas, args.C)
    lines = [f"# hybrid loss gradient check: {args.n_trials} pairs, seed {args.seed}, C {args.C}, step 1e-6"]
    lines += [f"alpha {a} max_rel_error {e:.3e}" for a, e in result.max_rel_error.items()]
    status = "PASS" if result.passed else "FAIL"
    lines.append(f"{status} max_rel_error {result.worst:.3e} (tolerance {REL_TOL:g})")
    outputs = []
    failed = not result.passed
    if args.sweep_offset:
        sweep_alpha = args.alpha if args.alpha is not None else 0.0
        table = offset_sweep(alpha=sweep_alpha, C=args.C)
        smooth = sweep_is_smooth(table)
        disjoint = table[table[:, 2] == 0]
        informative = bool(np.all(disjoint[:, 4] != 0))
        outputs.append(_write(out_dir, "sweep.txt", format_sweep(table)))
        lines.append(f"sweep smooth {smooth} nwd_gradient_nonzero_when_disjoint {informative}")
        print(format_sweep(table), end="")
        failed = failed or not (smooth and informative)
    text = "\n".join(lines) + "\n"
    outputs.insert(0, _write(out_dir, "gradcheck.txt", text))
    print(text, end="")
    if failed:
        raise CheckFailed(lines[-1], outputs)
    return outputs, [], []


def cmd_eval(args, out_dir):
    if args.interp != "all-point":
        raise NotImplementedError("101-point interpolation is not implemented; use --interp all-point")
    result = evaluate_files(args.detections, args.ground_truths)
    outputs = [
        _write(out_dir, "eval.txt", format_eval_lines(result)),
        _write(out_dir, "eval_table.txt", format_eval_table(result)),
    ]
    print(format_eval_table(result), end="")
    return outputs, [args.detections, args.ground_truths], []


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default %(default)s)")
    common.add_argument("--threads", type=int, default=None, help="cap BLAS/OpenMP threads")
    common.add_argument("--out", default=None, help="output directory (default runs/<subcommand>)")

    parser = argparse.ArgumentParser(prog="sbpyolo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="per-layer params and FLOPs")
    p.add_argument("config", help="config path or bundled name (e.g. sbp-yolo)")
    p.add_argument("--input", type=int, default=None, help="square input size (default from config)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("forward", parents=[common], help="run a seeded forward pass")
    p.add_argument("config")
    p.add_argument("--input", type=int, default=None)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--weights", nargs=2, metavar=("BLOB", "MANIFEST"), help="load weights instead of seeding")
    p.add_argument("--save-weights", action="store_true", help="write weights.bin / weights.txt")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("gradcheck", parents=[common], help="hybrid loss finite-difference check")
    p.add_argument("--n-trials", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=None, help="IoU weight; default sweeps 0, 0.5, 1")
    p.add_argument("--C", type=float, default=0.5, help="NWD normalization constant")
    p.add_argument("--sweep-offset", action="store_true", help="also emit the gradient-vs-offset table")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("eval", parents=[common], help="precision, recall and mAP")
    p.add_argument("detections")
    p.add_argument("ground_truths")
    p.add_argument("--interp", choices=["all-point", "101"], default="all-point")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_dir = args.out or os.path.join("runs", args.command)
    limits = threadpool_limits(limits=args.threads) if args.threads else contextlib.nullcontext()
    try:
        os.makedirs(out_dir, exist_ok=True)
        with limits:
            outputs, inputs, conventions = args.func(args, out_dir)
    except CheckFailed as exc:
        msg, outputs = exc.args
        _manifest(args, out_dir, outputs)
        print(f"sbpyolo {args.command}: check failed: {msg}", file=sys.stderr)
        return 1
    except (SBPError, OSError, ValueError, NotImplementedError) as exc:
        print(f"sbpyolo {args.command}: error: {exc}", file=sys.stderr)
        return 2
    _manifest(args, out_dir, outputs, inputs, conventions)
    return 0


if __name__ == "__main__":
    sys.exit(main())
