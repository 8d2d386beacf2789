"""Command-line front end: ``regen-lil <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 validation failure.
"""
from __future__ import annotations

import argparse
import contextlib
import math
import sys

from . import levy_models as lm
from .harness import experiments as ex
from .harness.records import (ExperimentManifest, ManifestError, load_manifest, parse_number_list,
                              records_to_csv)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number_list(text):
    try:
        return parse_number_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _model(text):
    try:
        return lm.parse_model(text)
    except lm.ModelError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_reps(value: int, flag: str = "--reps") -> int:
    if value < 1:
        raise UsageError(f"{flag} must be a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="regen-lil", description="Block counts of regenerative compositions: "
                "tables, Monte Carlo experiments and checks.")
    sub = p.add_subparsers(dest="command", required=True, metavar="subcommand")

    t = sub.add_parser("phi-table", help="tabulate Phi, phi' and the large-t expansion")
    t.add_argument("--model", type=_model, required=True, help='e.g. "kind=gamma theta=1 lambda=1"')
    t.add_argument("--t", type=_number_list, required=True, help="list: 1e3,1e4 or geo:1e2:1e6:5")

    c = sub.add_parser("clt", help="CLT ensemble of normalized block counts")
    c.add_argument("--model", type=_model, required=True)
    c.add_argument("--n", type=str, required=True, help="n grid: 1e3,1e4 or geo:1e3:1e6:4")
    c.add_argument("--reps", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)

    l_ = sub.add_parser("lil", help="coupled trajectories n -> K_n with LIL normalization")
    l_.add_argument("--model", type=_model, required=True)
    l_.add_argument("--nmax", type=float, required=True)
    l_.add_argument("--eps", type=float, default=None, help="jump truncation; default: automatic")
    l_.add_argument("--reps", type=int, default=1, help="number of trajectories")
    l_.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bm-lil", help="Brownian convolution trajectories with LIL normalization")
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--T", type=float, required=True)
    b.add_argument("--step", type=float, required=True)
    b.add_argument("--kernel", choices=("power", "power_log"), default="power")
    b.add_argument("--reps", type=int, default=1, help="number of trajectories")
    b.add_argument("--seed", type=int, default=0)

    sub.add_parser("validate", help="run the invariant suite")

    r = sub.add_parser("replay", help="re-run a persisted manifest")
    r.add_argument("--manifest", required=True, help="manifest.txt or a run directory")

    for sp in (c, l_, b, r):
        sp.add_argument("--out", default=None, help="directory for manifest, CSV and metadata; "
                        "without it the CSV goes to stdout")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (capped by REGEN_LIL_THREADS)")
    return p


def _phi_table(args, out):
    model = args.model
    out.write("t,Phi,phi_prime_log_t,asymptotic,difference\n")
    for t in args.t:
        if not t > 0:
            raise UsageError(f"--t entries must be positive, got {t!r}")
        val = lm.phi(model, t)
        der = lm.phi_log_derivative(model, math.log(t))
        if model.is_cp:
            asym = diff = "-"
        else:
            a = lm.phi_asymptotic(model, t)
            asym, diff = "%.12g" % a, "%.6g" % (val - a)
        out.write(f"{t:.12g},{val:.12g},{der:.12g},{asym},{diff}\n")


def _emit(result, args, out, err):
    if args.out:
        result.persist(args.out)
        err.write(f"wrote {args.out}/manifest.txt, results.csv, metadata.json\n")
    else:
        out.write(records_to_csv(result.records))


def _summarize(result, err):
    meta = result.metadata
    if meta.get("experiment") == "clt":
        for row in meta["per_n"]:
            err.write(f"n={row['n']}: mean={row['mean']:.4f} var={row['variance']:.4f} "
                      f"KS={row.get('ks_distance', float('nan')):.4f}\n")
    for i, ext in enumerate(meta.get("running_extremes", [])):
        err.write(f"trajectory {i}: max={ext['running_max']:.4f} min={ext['running_min']:.4f} "
                  f"coverage={ext['coverage']:.3f}\n")
    if meta.get("diagnostic"):
        err.write("diagnostic output: no pass/fail band applies\n")


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    with contextlib.redirect_stderr(err):
        args = build_parser().parse_args(argv)
    try:
        if args.command == "phi-table":
            _phi_table(args, out)
            return EXIT_OK
        if args.command == "validate":
            from .validation import run_validation

            ok = run_validation(lambda line: out.write(line + "\n"))
            return EXIT_OK if ok else EXIT_VALIDATION
        if args.command == "clt":
            _positive_reps(args.reps)
            manifest = ExperimentManifest.for_model("clt", args.model, args.n, args.reps, args.seed)
        elif args.command == "lil":
            _positive_reps(args.reps)
            nmax = int(round(args.nmax))
            manifest = ExperimentManifest.for_model("lil", args.model, ex.lil_grid(nmax),
                                                    args.reps, args.seed, epsilon=args.eps)
        elif args.command == "bm-lil":
            _positive_reps(args.reps)
            manifest = ExperimentManifest("bm_lil", args.kernel, repr(float(args.T)), args.reps,
                                          args.seed, alpha=args.alpha, step=args.step)
        else:
            manifest = load_manifest(args.manifest)
        result = ex.run_experiment(manifest, workers=args.workers)
        _emit(result, args, out, err)
        _summarize(result, err)
        return EXIT_OK
    except UsageError as exc:
        err.write(f"regen-lil: error: {exc}\n")
        return EXIT_USAGE
    except (ManifestError, lm.ModelError, ex.ExperimentError, ValueError, OSError) as exc:
        err.write(f"regen-lil: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
