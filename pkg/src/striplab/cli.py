"""Command-line entry point: ``striplab {verify,bench,losses,filter}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import bench, fixtures, fusion
from . import objectives as obj
from . import tensor

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_BAD_ARGS = 2
EXIT_IO = 3

DEFAULT_SEED = 20240917


def default_seed() -> int:
    value = os.environ.get("STRIPLAB_SEED")
    return int(value) if value else DEFAULT_SEED


def cmd_verify(args) -> int:
    from .verification import suite

    impls = None
    if args.inject_fault:
        name, impl = suite.FAULTS[args.inject_fault]
        impls = {name: impl}
    ok = True
    for res in suite.run_all(seed=args.seed, cases=args.cases, impls=impls):
        for line in res.lines:
            print(line)
        status = "PASS" if res.passed else "FAIL " + ",".join(res.failures)
        print(f"suite {res.name}: {status}")
        ok &= res.passed
    print(f"verify: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_bench(args) -> int:
    cfg = bench.BenchConfig(grid=bench.parse_grid(args.grid), channels=args.channels, k=args.k,
                            reps=args.reps, warmup=args.warmup, seed=args.seed, out=args.out)
    records, skipped = bench.run_bench(cfg)
    text = bench.render_csv(records, skipped)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_losses(args) -> int:
    if args.make:
        make = fixtures.FACTORIES[args.make]
        fx = make() if args.make == "unit" else make(seed=args.seed)
        fx.save(args.fixture_dir)
    fx = fixtures.LossFixture.load(args.fixture_dir)
    if args.stride is not None:
        fx.meta.stride = args.stride
    losses = fixtures.evaluate_losses(fx)
    sys.stdout.write(obj.format_report(losses))
    return EXIT_OK


def cmd_filter(args) -> int:
    tau = fusion.check_tau(args.tau)
    samples = fusion.read_manifest(args.manifest)
    if args.w:
        w = tensor.load(args.w)
        b = tensor.load(args.b) if args.b else [0.0] * w.shape[0]
        params = fusion.FusionParams(w, b, args.lam)
    else:
        d_a = samples[0].audio_feature.shape[0] if samples else 1
        params = fusion.FusionParams.identity(d_a, args.lam)
    result = fusion.filter_samples(samples, params, tau)
    if args.out:
        fusion.write_filter_output(args.out, result)
        print(result.summary())
    else:
        for sid in result.retained:
            print(sid)
        print(result.summary())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    seed = default_seed()
    p = argparse.ArgumentParser(prog="striplab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run oracle, gradient, impulse and chain suites")
    v.add_argument("--seed", type=int, default=seed)
    v.add_argument("--cases", type=int, default=100, help="randomized cases per oracle")
    v.add_argument("--inject-fault", choices=["strip-index"], help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="time self-attention against STDA")
    b.add_argument("--grid", default="8,16,32,64")
    b.add_argument("--channels", type=int, default=32)
    b.add_argument("--k", type=int, default=7)
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--warmup", type=int, default=1)
    b.add_argument("--seed", type=int, default=seed)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    lo = sub.add_parser("losses", help="evaluate the loss stack on a fixture directory")
    lo.add_argument("fixture_dir")
    lo.add_argument("--make", choices=sorted(fixtures.FACTORIES),
                    help="write a synthetic fixture of this kind first")
    lo.add_argument("--stride", type=int)
    lo.add_argument("--seed", type=int, default=seed)
    lo.set_defaults(func=cmd_losses)

    f = sub.add_parser("filter", help="filter a sample manifest by fused-feature cosine")
    f.add_argument("manifest")
    f.add_argument("--tau", type=float, default=fusion.DEFAULT_TAU)
    f.add_argument("--lam", type=float, default=fusion.DEFAULT_LAMBDA)
    f.add_argument("--w", help="TSR1 projection d_a x d_t (identity when omitted)")
    f.add_argument("--b", help="TSR1 bias d_a (zeros when omitted)")
    f.add_argument("--out")
    f.set_defaults(func=cmd_filter)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, fusion.ManifestError, tensor.TensorFormatError) as exc:
        print(f"striplab: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"striplab: error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS


if __name__ == "__main__":
    sys.exit(main())
