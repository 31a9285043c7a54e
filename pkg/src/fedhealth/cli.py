"""Command-line entry point: ``fedhealth run | verify-crypto | gradcheck | synth``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import __version__

logger = logging.getLogger("fedhealth")

TEST_KEY_BITS = 256


def _run(args):
    from .data.har import load_har
    from .experiment import run_experiment
    from .federation.config import RunConfig

    config = RunConfig.load(args.config) if args.config else RunConfig()
    changes = {"output_dir": args.out}
    if args.repeats is not None:
        changes["repeats"] = args.repeats
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.variant is not None:
        changes["transfer"] = dataclasses.replace(config.transfer, variant=args.variant)
    if args.insecure_small_keys:
        changes["crypto"] = dataclasses.replace(
            config.crypto, key_bits=min(config.crypto.key_bits, TEST_KEY_BITS), insecure_small_keys=True
        )
    config = config.replace(**changes)
    dataset = load_har(args.data)
    logger.info("loaded %d windows from %s", len(dataset), args.data)
    report = run_experiment(config, dataset)
    print(report.summary(), end="")
    print(f"reports written to {args.out}")
    return 0 if report.complete else 1


def _print_results(results):
    for r in results:
        print(r)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _verify_crypto(args):
    from .crypto.selfcheck import run_suite

    return _print_results(run_suite(bits=args.bits, seed=args.seed, n_pairs=args.pairs))


def _gradcheck(args):
    from .gradcheck import run_suite

    return _print_results(run_suite(seed=args.seed))


def _synth(args):
    from .data.synthetic import make_synthetic_har, write_uci_layout

    ds = make_synthetic_har(total_windows=args.windows, seed=args.seed)
    write_uci_layout(ds, args.out)
    print(f"wrote {len(ds)} synthetic windows to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="fedhealth", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug output")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the repeated federated experiment and write reports")
    run.add_argument("--config", help="JSON run configuration (defaults are used when omitted)")
    run.add_argument("--data", required=True, help="root of the UCI HAR dataset")
    run.add_argument("--out", required=True, help="output directory for report files")
    run.add_argument("--variant", choices=("coral", "mmd", "finetune"))
    run.add_argument("--repeats", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument(
        "--insecure-small-keys",
        action="store_true",
        help=f"use {TEST_KEY_BITS}-bit Paillier keys (fast, NOT secure)",
    )
    run.set_defaults(func=_run)

    vc = sub.add_parser("verify-crypto", help="run the homomorphic-encryption property suite")
    vc.add_argument("--bits", type=int, default=TEST_KEY_BITS)
    vc.add_argument("--pairs", type=int, default=1000)
    vc.add_argument("--seed", type=int, default=0)
    vc.set_defaults(func=_verify_crypto)

    gc = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=_gradcheck)

    sy = sub.add_parser("synth", help="write a synthetic dataset in the UCI HAR file layout")
    sy.add_argument("--out", required=True)
    sy.add_argument("--windows", type=int, default=10_299)
    sy.add_argument("--seed", type=int, default=0)
    sy.set_defaults(func=_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        from .exceptions import FedHealthError

        if not isinstance(exc, (FedHealthError, OSError, ValueError)):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
