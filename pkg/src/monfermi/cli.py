"""Command-line entry point: ``monfermi run | scan | ipr | verify``.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import config as cfgfile
from .ensemble import RunFailure, run_ensemble, verify
from .unravelings import ConfigError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3

SCAN_GAMMAS = [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45]
IPR_GAMMAS = [0.04, 0.2, 0.4, 1.0]
IPR_SIZES = [16, 32, 64, 128]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _ensemble_args(p):
    p.add_argument("--config", help="flat key = value run file")
    p.add_argument("--preset", choices=["desk", "paper"])
    p.add_argument("--gamma", type=_floats, help="comma-separated measurement rates")
    p.add_argument("--L", type=_ints, help="comma-separated system sizes")
    p.add_argument("--unraveling", choices=["qsd", "qj", "both"])
    p.add_argument("--trajectories", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--t-final", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--sample-every", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--smooth-window", type=int)
    p.add_argument("--prominence", type=float)
    p.add_argument("--weighted-fit", action="store_true", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-plots", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="monfermi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    _ensemble_args(sub.add_parser("run", help="trajectory ensemble over (gamma, L) cells"))
    _ensemble_args(sub.add_parser("scan", help="gamma sweep and bifurcation threshold"))
    _ensemble_args(sub.add_parser("ipr", help="L sweep and IPR power-law fit"))
    v = sub.add_parser("verify", help="Gaussian engine against the exact Fock oracle")
    v.add_argument("--L", type=int, default=6)
    v.add_argument("--gamma", type=float, default=0.3)
    v.add_argument("--steps", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--dt", type=float)
    v.add_argument("--unraveling", choices=["qsd", "qj", "both"], default="both")
    return parser


def _settings(args) -> dict:
    settings = cfgfile.load(args.config) if args.config else {}
    for key in ("preset", "gamma", "L", "unraveling", "trajectories", "seed", "t_final",
                "dt", "burn_in", "sample_every", "workers", "smooth_window",
                "prominence", "weighted_fit", "out"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    return settings


VERB_DEFAULTS = {
    "run": {"gamma": [0.1, 0.4], "out": "results"},
    "scan": {"gamma": SCAN_GAMMAS, "L": [64], "preset": "desk", "out": "results"},
    "ipr": {"gamma": IPR_GAMMAS, "L": IPR_SIZES, "preset": "desk", "out": "results"},
}


def _summary(verb, report) -> dict:
    if verb == "scan":
        return {k: v.to_dict() for k, v in report.bifurcations.items()}
    if verb == "ipr":
        return {k: {"alpha": v.alpha, "r_squared": v.r_squared}
                for k, v in report.power_laws.items()}
    return {f"{c.unraveling}_g{c.gamma:g}_L{c.L}": {
        "n_bar": c.n_bar, "n_bar_stderr": c.n_bar_stderr, "modality": c.maxima.modality,
        "ipr_mean": c.ipr_mean} for c in report.cells}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "verify":
            unr = ("qsd", "qj") if args.unraveling == "both" else (args.unraveling,)
            res = verify(args.L, args.gamma, args.steps, args.seed, args.dt, unr)
            print(json.dumps(res, indent=2))
            return EXIT_OK if res["passed"] else EXIT_VERIFY
        settings = _settings(args)
        defaults = dict(VERB_DEFAULTS[args.verb])
        if "preset" in settings:
            # explicit preset sizes win over verb defaults
            defaults.pop("L", None)
        run = cfgfile.build_run_config(settings, defaults)
        report = run_ensemble(run, write=False)
        if run.out:
            from .ensemble import emit_outputs
            emit_outputs(report, run.out, plots=not args.no_plots)
        print(json.dumps(_summary(args.verb, report), indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as exc:
        print(f"monfermi: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RunFailure, OSError, ArithmeticError) as exc:
        print(f"monfermi: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
