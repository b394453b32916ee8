"""Command line front end: simulation, estimation, selection, and table runs.

Exit codes: 0 on success, 2 for usage errors (argparse), 1 for runtime
failures such as degenerate data or unreadable files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .banding import select_k
from .cholesky import build_estimated_inverse
from .errors import LongmemError, ParameterError
from .experiments import (
    config_from_file,
    desk_config,
    full_config,
    run_table,
    table_csv,
    table_json,
)
from .farima import _PRESETS, FarimaModel, autocov, simulate
from .regression import build_detrended_inverse, detrend, fgls, polynomial_design


def _float_list(text: str) -> tuple:
    if not text.strip():
        return ()
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated floats, got {text!r}")


def _design_spec(text: str):
    """Parse --design values: poly:p=2, poly:0,1,4, or cols:FILE."""
    kind, sep, payload = text.partition(":")
    if not sep or not payload:
        raise argparse.ArgumentTypeError(
            f"expected poly:... or cols:FILE, got {text!r}")
    if kind == "cols":
        return ("cols", payload)
    if kind != "poly":
        raise argparse.ArgumentTypeError(f"unknown design kind {kind!r}")
    if payload.startswith("p="):
        try:
            degree = int(payload[2:])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad degree in {text!r}")
        if degree < 0:
            raise argparse.ArgumentTypeError("degree must be >= 0")
        return ("poly", tuple(range(degree + 1)))
    try:
        exps = tuple(int(tok) for tok in payload.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad exponent list in {text!r}")
    return ("poly", exps)


def _load_series(path: str) -> np.ndarray:
    try:
        values = np.loadtxt(path, dtype=float, ndmin=1)
    except ValueError as exc:
        raise ParameterError(f"{path}: {exc}") from None
    if values.ndim != 1:
        raise ParameterError(f"{path}: expected one value per line")
    return values


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _model_from_args(args) -> FarimaModel:
    if args.dgp is not None:
        if args.ar or args.ma:
            raise ParameterError("--dgp and --ar/--ma are mutually exclusive")
        return FarimaModel.preset(args.dgp, d=args.d, sigma2=args.sigma2)
    return FarimaModel(ar=args.ar, ma=args.ma, d=args.d, sigma2=args.sigma2)


def _cmd_simulate(args) -> int:
    u = simulate(_model_from_args(args), args.n, args.seed)
    _emit("".join(f"{v:.17g}\n" for v in u), args.out)
    return 0


def _cmd_autocov(args) -> int:
    gamma = autocov(_model_from_args(args), args.n)
    _emit("".join(f"{v:.17g}\n" for v in gamma.values), args.out)
    return 0


def _cmd_estimate(args) -> int:
    u = _load_series(args.input)
    k = args.k if args.k is not None else select_k(u).chosen_k
    inv = build_estimated_inverse(u, k)
    _emit(inv.to_json() + "\n", args.out)
    return 0


def _cmd_select_k(args) -> int:
    trace = select_k(_load_series(args.input))
    lines = [f"chosen_k {trace.chosen_k}"]
    if args.trace:
        lines.extend(f"{k},{r:.17g}"
                     for k, r in zip(trace.candidates, trace.risks))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_fgls(args) -> int:
    y = _load_series(args.input)
    kind, payload = args.design
    if kind == "poly":
        design = polynomial_design(len(y), payload)
    else:
        try:
            design = np.loadtxt(payload, dtype=float, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ParameterError(f"{payload}: {exc}") from None
    k = args.k if args.k is not None else select_k(detrend(y, design).resid).chosen_k
    fit = fgls(y, design, build_detrended_inverse(y, design, k))
    doc = {"k": int(k), "cond": fit.cond, "beta": fit.beta.tolist(),
           "beta_raw": None if fit.raw_beta is None else fit.raw_beta.tolist()}
    if args.residuals:
        doc["residuals"] = fit.resid.tolist()
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _cmd_experiment(args) -> int:
    if args.threads is not None:
        os.environ["LONGMEM_THREADS"] = str(args.threads)
    if args.config is not None:
        cfg = config_from_file(args.config, reps=args.reps, seed=args.seed)
    elif args.scale == "desk":
        cfg = desk_config(args.table, seed=42 if args.seed is None else args.seed,
                          reps=250 if args.reps is None else args.reps)
    else:
        cfg = full_config(args.table, seed=42 if args.seed is None else args.seed,
                          reps=1000 if args.reps is None else args.reps)
    result = run_table(cfg)
    text = table_csv(result) if args.format == "csv" else table_json(result)
    _emit(text, args.out)
    for msg in result.failures:
        print(f"warning: {msg}", file=sys.stderr)
    return 0


def _add_model_args(sp) -> None:
    sp.add_argument("--dgp", choices=sorted(_PRESETS),
                    help="short-memory preset; overrides --ar/--ma")
    sp.add_argument("--ar", type=_float_list, default=(),
                    help="comma-separated AR coefficients")
    sp.add_argument("--ma", type=_float_list, default=(),
                    help="comma-separated MA coefficients")
    sp.add_argument("--d", type=float, required=True,
                    help="memory parameter in [0, 0.5)")
    sp.add_argument("--sigma2", type=float, default=1.0,
                    help="innovation variance (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="longmem",
        description="Banded inverse autocovariance estimation for "
                    "long-memory time series")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw one realization, one value per line")
    _add_model_args(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("autocov", help="print gamma_0..gamma_{n-1}")
    _add_model_args(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_autocov)

    sp = sub.add_parser("estimate",
                        help="banded inverse from a series file, as JSON")
    sp.add_argument("--input", required=True,
                    help="text file with one observation per line")
    sp.add_argument("--k", type=int,
                    help="bandwidth; chosen by subsampled risk when omitted")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("select-k", help="run the bandwidth selector")
    sp.add_argument("--input", required=True)
    sp.add_argument("--trace", action="store_true",
                    help="also print candidate,risk lines")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_select_k)

    sp = sub.add_parser("fgls",
                        help="feasible GLS trend fit with banded weights")
    sp.add_argument("--input", required=True, help="response series file")
    sp.add_argument("--design", type=_design_spec, required=True,
                    help="poly:p=DEGREE, poly:E1,E2,..., or cols:FILE.csv")
    sp.add_argument("--k", type=int,
                    help="bandwidth; chosen by subsampled risk when omitted")
    sp.add_argument("--residuals", action="store_true",
                    help="include GLS residuals in the output")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_fgls)

    sp = sub.add_parser("experiment", help="run one Monte Carlo table")
    target = sp.add_mutually_exclusive_group(required=True)
    target.add_argument("--table", type=int, choices=(1, 2, 3, 4))
    target.add_argument("--config", help="JSON or TOML grid file")
    sp.add_argument("--scale", choices=("desk", "full"), default="desk",
                    help="grid size when --table is used (default desk)")
    sp.add_argument("--reps", type=int, help="override replication count")
    sp.add_argument("--seed", type=int, help="override master seed")
    sp.add_argument("--threads", type=int,
                    help="worker processes per cell (sets LONGMEM_THREADS)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LongmemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
