"""Command line: ``sbcthermo {selfcheck,timeseries,sweep,fluctuation} [options]``.

Exit status: 0 when every check passes, 1 on a verification failure, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import RUNNERS, ConfigError, _read_toml, load_config

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2

# flag -> (config key, type)
_PARAM_FLAGS = {
    "--g": ("g", float),
    "--beta": ("beta", float),
    "--omega-b": ("omega_b", float),
    "--h": ("h", float),
    "--lambda-x0": ("lambda_x0", float),
    "--lambda-z0": ("lambda_z0", float),
    "--alpha-x": ("alpha_x", float),
    "--alpha-z": ("alpha_z", float),
    "--alpha": ("alpha", float),
    "--n-bath": ("n_bath", int),
    "--tau-prime": ("tau_prime", float),
    "--boundary": ("boundary", str),
    "--n-max": ("n_max", int),
    "--mass": ("mass_m", float),
    "--g1": ("g_1", float),
    "--omega-s0": ("omega_s0", float),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML file; flags override its keys")
    common.add_argument("--model", choices=("spin", "oscillator"))
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--steps", type=int, dest="n_steps", help="propagation steps over [0, tau']")
    common.add_argument("--jobs", type=int, help="parallel sweep points")
    common.add_argument("--seed", type=int)
    for flag, (dest, typ) in _PARAM_FLAGS.items():
        common.add_argument(flag, dest=dest, type=typ, choices=("open", "periodic") if dest == "boundary" else None)

    parser = argparse.ArgumentParser(prog="sbcthermo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    sc = sub.add_parser("selfcheck", parents=[common], help="identity and fluctuation-theorem checks")
    sc.add_argument("--strict", type=float, metavar="TOL", help="override every check tolerance")
    sub.add_parser("timeseries", parents=[common], help="W, Q, E, entropy, F along one protocol")
    sw = sub.add_parser("sweep", parents=[common], help="delta_max quantities over a parameter grid")
    sw.add_argument("--variable", choices=("g", "omega_b", "tau_prime"))
    sw.add_argument("--start", type=float)
    sw.add_argument("--stop", type=float)
    sw.add_argument("--points", type=int)
    sub.add_parser("fluctuation", parents=[common], help="work distribution, Crooks and Jarzynski")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return int(exc.code or 0)
    path = args.pop("config", None)
    sweep = {k: args.pop(k, None) for k in ("variable", "start", "stop", "points")}
    if any(v is not None for v in sweep.values()):
        args["sweep"] = sweep
    args["out"] = args.pop("out", None)
    try:
        file_values = _read_toml(path) if path else {}
        file_values.setdefault("experiment", args["experiment"])
        cfg = load_config(file_values, args)
        result = RUNNERS[cfg.experiment](cfg)
    except ConfigError as exc:
        print(f"sbcthermo: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in result.lines:
        print(line)
    if cfg.out_path is None and result.csv is not None:
        sys.stdout.write(result.csv)
    return EXIT_OK if result.ok else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
