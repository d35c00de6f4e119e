"""Command-line entry point: ``cogfuse {verify,bench,loss-demo,fuse-demo}``."""
from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path

from . import bench
from .adcot import TraceParseError, load_labels, load_traces
from .caf import CafConfig
from .fixtures import fixture_path
from .numeric import CogfuseError, ConfigError, KernelKind
from .pipeline import (
    FuseDemoConfig,
    LossDemoConfig,
    format_fuse_report,
    format_loss_report,
    run_fuse_demo,
    run_loss_demo,
)
from .verify import SABOTAGE_MODES, format_report, run_verify
from .vision import read_pnm, synthetic_image

EXIT_FAIL = 1
EXIT_CONFIG = 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_verify(args) -> int:
    CafConfig(args.dim, args.heads)
    t0 = time.perf_counter()
    results = run_verify(seed=args.seed, kernel=args.kernel, sabotage=args.sabotage,
                         threads=args.threads, scale=args.scale, dim=args.dim, heads=args.heads)
    header = (f"cogfuse verify seed={args.seed} kernel={args.kernel or 'all'} "
              f"sabotage={args.sabotage} dim={args.dim} heads={args.heads}")
    _emit(format_report(results, header), args.out)
    print(f"verify finished in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return 0 if all(r.passed for r in results) else EXIT_FAIL


def cmd_bench(args) -> int:
    CafConfig(args.dim, args.heads)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        records, slopes = bench.run_bench(
            args.seq_lens, dim=args.dim, heads=args.heads, methods=args.methods.split(","),
            kernel=args.kernel or KernelKind.IDENTITY, seed=args.seed, repeats=args.repeats,
            n_queries=args.queries, projection=args.projection,
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    text = bench.write_json(records, slopes) if args.format == "json" else \
        bench.write_csv(records, slopes)
    _emit(text, args.out)
    for s in slopes:
        print(f"{s.method}: log-log slope {s.slope:.3f} over {s.n_points} points", file=sys.stderr)
    return 0


def cmd_loss_demo(args) -> int:
    traces_path = args.traces or fixture_path(args.fixture, "traces")
    labels_path = args.labels or fixture_path(args.fixture, "labels")
    traces = load_traces(traces_path, renormalize=args.renormalize)
    labels = load_labels(labels_path)
    cfg = LossDemoConfig(steps=args.steps, lr=args.lr, lr_uncertainty=args.lr_uncertainty,
                         seed=args.seed)
    history = run_loss_demo(traces, labels, cfg)
    _emit(format_loss_report(history, every=args.every), args.out)
    return 0


def cmd_fuse_demo(args) -> int:
    if args.image:
        img = read_pnm(args.image)
    else:
        h, w = args.size
        img = synthetic_image(h, w, args.synthetic)
    cfg = FuseDemoConfig(
        tile=args.tile, thumb=args.thumb, model_dim=args.dim, num_heads=args.heads,
        kernel=args.kernel or "identity", question_len=args.question_len, cot_len=args.cot_len,
        seed=args.seed if args.seed is not None else (args.synthetic or 0),
        query_source=args.query_source,
    )
    _emit(format_fuse_report(run_fuse_demo(img, cfg)), args.out)
    return 0


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    return h, w


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cogfuse", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    kernels = [k.value for k in KernelKind]

    v = sub.add_parser("verify", help="run the attention and loss property suites")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--kernel", choices=kernels, default=None,
                   help="restrict attention suites to one kernel (default: all)")
    v.add_argument("--sabotage", choices=sorted(SABOTAGE_MODES), default="none")
    v.add_argument("--dim", type=int, default=64)
    v.add_argument("--heads", type=int, default=8)
    v.add_argument("--threads", type=int, default=1)
    v.add_argument("--scale", type=float, default=1.0, help="multiply trial counts")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="time linear vs quadratic attention")
    b.add_argument("--seq-lens", type=_int_list, default=[1024, 2048, 4096, 8192])
    b.add_argument("--dim", type=int, default=64)
    b.add_argument("--heads", type=int, default=8)
    b.add_argument("--methods", default="linear,quadratic,softmax")
    b.add_argument("--kernel", choices=kernels, default=None)
    b.add_argument("--queries", type=int, default=None, help="fixed query count (default: N)")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--projection", action="store_true",
                   help="apply seeded random Q/K/V projections before head splitting")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--format", choices=["csv", "json"], default="csv")
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)

    ld = sub.add_parser("loss-demo", help="gradient descent on the distillation loss")
    ld.add_argument("--traces", default=None)
    ld.add_argument("--labels", default=None)
    ld.add_argument("--fixture", choices=["consistent", "conflicting"], default="consistent",
                    help="bundled data used when --traces/--labels are omitted")
    ld.add_argument("--steps", type=int, default=500)
    ld.add_argument("--lr", type=float, default=0.5)
    ld.add_argument("--lr-uncertainty", type=float, default=0.1)
    ld.add_argument("--renormalize", action="store_true")
    ld.add_argument("--every", type=int, default=1, help="report every k-th step")
    ld.add_argument("--seed", type=int, default=0)
    ld.add_argument("--out", default=None)
    ld.set_defaults(func=cmd_loss_demo)

    f = sub.add_parser("fuse-demo", help="run the image + prompt fusion pipeline")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", help="binary PPM/PGM file")
    src.add_argument("--synthetic", type=int, metavar="SEED")
    f.add_argument("--size", type=_size, default=(896, 896), help="synthetic image HxW")
    f.add_argument("--tile", type=int, default=448)
    f.add_argument("--thumb", type=int, default=448)
    f.add_argument("--question-len", type=int, default=8)
    f.add_argument("--cot-len", type=int, default=16)
    f.add_argument("--dim", type=int, default=64)
    f.add_argument("--heads", type=int, default=8)
    f.add_argument("--kernel", choices=kernels, default=None)
    f.add_argument("--query-source", choices=["text", "image"], default="text")
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_fuse_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceParseError, CogfuseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
