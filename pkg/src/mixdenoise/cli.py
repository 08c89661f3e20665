"""Command-line interface.

Verbs: synthesize, restore, experiment, sweep, estimate.  Exit status is
0 on full success, 1 when some cells failed, 2 on configuration errors.
"""

import argparse
import logging
import sys

from .config import (
    ConfigError,
    build_experiment_config,
    build_noise_spec,
    build_solver_config,
    load_config,
)
from .harness import SWEEP_AXES, run_experiment, sweep
from .image import load_pgm, psnr, save_pgm
from .noise import estimate_noise_variance, synthesize
from .pipeline import restore


def _load_raw(path):
    if path is None:
        return {}
    return load_config(path)


def cmd_synthesize(args):
    raw = _load_raw(args.config)
    spec = build_noise_spec(raw, set(), seed=args.seed)
    if spec is None:
        raise ConfigError("synthesize needs a noise.kind other than 'none'")
    clean = load_pgm(args.input)
    noisy = synthesize(clean, spec)
    save_pgm(noisy, args.output)
    print(f"noisy PSNR vs input: {psnr(clean, noisy):.4f} dB")
    return 0


def cmd_restore(args):
    raw = _load_raw(args.config)
    solver = build_solver_config(raw, set())
    noisy = load_pgm(args.input)
    clean = load_pgm(args.clean) if args.clean else None
    restored, state = restore(noisy, solver, clean_ref=clean)
    save_pgm(restored, args.output)
    print(f"stopped after {state.iteration} iterations")
    if clean is not None:
        print(f"noisy PSNR:    {psnr(clean, noisy):.4f} dB")
        print(f"restored PSNR: {psnr(clean, restored):.4f} dB")
    return 0


def cmd_experiment(args):
    cfg = build_experiment_config(_load_raw(args.config))
    rows, n_failed = run_experiment(cfg)
    for r in rows:
        print(
            f"{r['image']}: noisy {r['noisy_psnr_db']:.2f} dB -> "
            f"restored {r['restored_psnr_db']:.2f} dB "
            f"({r['iterations']:.1f} iters)"
        )
    if not rows:
        return 1
    return 1 if n_failed else 0


def cmd_sweep(args):
    cfg = build_experiment_config(_load_raw(args.config))
    values = [float(v) for v in args.values.split(",")]
    curve, n_failed = sweep(cfg, args.axis, values)
    for point in curve:
        print(
            f"{args.axis}={point['value']:g}: noisy {point['noisy_psnr_db']:.2f} dB, "
            f"restored {point['restored_psnr_db']:.2f} dB"
        )
    return 1 if n_failed else 0


def cmd_estimate(args):
    img = load_pgm(args.input)
    var = estimate_noise_variance(img, method=args.method)
    print(f"estimated variance (0-255 scale): {var:.6f}")
    if var >= 0:
        print(f"estimated std: {var ** 0.5:.6f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mixdenoise",
        description="Mixed-noise image restoration: synthesis, EM estimation, "
        "weighted-TV restoration and batch experiments.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synthesize", help="corrupt a clean PGM per the noise config")
    p.add_argument("--config", help="config file with noise.* keys")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("restore", help="restore a noisy PGM")
    p.add_argument("--config", help="config file with solver.*/tv.*/denoiser.* keys")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--clean", help="clean reference for PSNR reporting")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("experiment", help="run the batch experiment in a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="run an experiment across one noise axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate", help="estimate the global noise variance")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("laplacian", "literal"), default="laplacian")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None):
    logging.basicConfig(format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
