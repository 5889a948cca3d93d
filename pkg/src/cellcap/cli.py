"""``cellcap`` command line.

Subcommands: ``analytic``, ``sweep``, ``figure`` and ``compare``.  Option
values come from, in decreasing priority, the command line, a ``--config``
file of ``key = value`` lines, and built-in defaults.  ``CELLCAP_SEED`` is
used when no seed is given anywhere else.

Exit status: 0 on success, 1 for invalid input, 2 for runtime failures
(non-converging quadrature, I/O errors).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

from . import analytic, experiments
from .experiments import FixedParams, SweepSpec
from .numerics import ConvergenceError, DomainError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

DEFAULTS: dict[str, object] = {
    "lambda_b": 30.0,
    "lambda_u": 30.0,
    "gamma_db": 0.0,
    "alpha": 4.0,
    "noise": 0.0,
    "power": 1.0,
    "shadow_db": 0.0,
    "seed": 42,
    "samples": experiments.DEFAULT_USER_SAMPLES,
    "trials": None,
    "workers": 1,
    "paths": "analytic",
    "thinning": "dependent",
}

_FLOAT_KEYS = {"lambda_b", "lambda_u", "gamma_db", "alpha", "noise", "power", "shadow_db"}
_INT_KEYS = {"seed", "samples", "trials", "workers"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def read_config(path: str | os.PathLike[str]) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _convert(key: str, value: object) -> object:
    if value is None:
        return None
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
    except ValueError as exc:
        raise UsageError(f"{key}: cannot parse {value!r}") from exc
    return value


def resolve(args: argparse.Namespace, key: str) -> object:
    """CLI flag, then config file, then environment (seed only), then default."""
    v = getattr(args, key, None)
    if v is not None:
        return _convert(key, v)
    cfg = getattr(args, "_config", {})
    if key in cfg:
        return _convert(key, cfg[key])
    if key == "seed" and os.environ.get("CELLCAP_SEED"):
        return _convert(key, os.environ["CELLCAP_SEED"])
    return DEFAULTS[key]


def _fixed(args: argparse.Namespace) -> FixedParams:
    return FixedParams(
        lambda_b=resolve(args, "lambda_b"),
        lambda_u=resolve(args, "lambda_u"),
        gamma_hat_db=resolve(args, "gamma_db"),
        alpha=resolve(args, "alpha"),
        noise=resolve(args, "noise"),
        power=resolve(args, "power"),
        shadow_db=resolve(args, "shadow_db"),
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_analytic(args: argparse.Namespace) -> int:
    fixed = _fixed(args)
    d, ch = fixed.densities(), fixed.channel()
    rows = [("analytic", analytic.metrics(d, ch, "quadrature"))]
    if analytic.closed_form_applies(ch):
        rows.append(("closed_form", analytic.metrics(d, ch, "closed_form")))
    rows.append(("asymptotic_dense_bs", analytic.metrics_asymptotic_dense_bs(d, ch)))
    rows.append(("asymptotic_dense_users", analytic.metrics_asymptotic_dense_users(d, ch)))
    header = ["path", "p_inactive", "p_selection", "p_success", "p_service", "c_service", "lambda_i"]
    lines = [",".join(header)]
    for name, m in rows:
        vals = m.as_dict()
        lines.append(",".join([name] + [repr(float(vals[k])) for k in header[1:]]))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    paths = tuple(p.strip() for p in str(resolve(args, "paths")).split(",") if p.strip())
    spec = SweepSpec(
        parameter=args.param,
        values=experiments.sweep_values(args.start, args.stop, args.step),
        fixed=_fixed(args),
        paths=paths,
        seed=resolve(args, "seed"),
        user_samples=resolve(args, "samples"),
        n_trials=resolve(args, "trials"),
        workers=resolve(args, "workers"),
        interference_model=resolve(args, "thinning"),
    )
    rows = experiments.run_sweep(spec)
    _emit(experiments.rows_to_csv(spec, rows), args.out)
    for r in rows:
        if r.failed:
            print(f"row {spec.parameter}={r.value!r} failed: {r.error}", file=sys.stderr)
    return EXIT_OK


def cmd_figure(args: argparse.Namespace) -> int:
    written = experiments.figure_preset(
        args.name,
        resolve(args, "seed"),
        args.out,
        user_samples=resolve(args, "samples"),
        workers=resolve(args, "workers"),
        shadow_db=resolve(args, "shadow_db"),
    )
    for p in written:
        print(p)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    fixed = _fixed(args)
    models = ("dependent", "independent") if args.thinning in (None, "both") else (args.thinning,)
    results = experiments.thinning_comparison(
        fixed,
        models,
        seed=resolve(args, "seed"),
        user_samples=resolve(args, "samples"),
        n_trials=resolve(args, "trials"),
        workers=resolve(args, "workers"),
    )
    reference = analytic.p_service(fixed.densities(), fixed.channel())
    lines = ["thinning,p_service,p_service_se,p_success,p_success_se,analytic_p_service,difference"]
    for model, est in results.items():
        lines.append(",".join([
            model,
            repr(est.p_service.value),
            repr(est.p_service.stderr),
            repr(est.p_success.value),
            repr(est.p_success.stderr),
            repr(reference),
            repr(est.p_service.value - reference),
        ]))
    if len(results) == 2:
        gap = results["dependent"].p_service.value - results["independent"].p_service.value
        lines.append(f"dependent_minus_independent,{gap!r},,,,,")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--lambda-b", dest="lambda_b", type=float, help="BS density (default 30)")
    g.add_argument("--lambda-u", dest="lambda_u", type=float, help="MU density (default 30)")
    g.add_argument("--gamma-db", dest="gamma_db", type=float, help="SINR target in dB (default 0)")
    g.add_argument("--alpha", type=float, help="pathloss exponent, > 2 (default 4)")
    g.add_argument("--noise", type=float, help="noise power; 0 = interference limited (default 0)")
    g.add_argument("--power", type=float, help="transmit power (default 1)")
    g.add_argument("--shadow-db", dest="shadow_db", type=float,
                   help="log-normal shadowing spread in dB, simulation only (default 0)")
    p.add_argument("--config", help="key = value file; flags override it")


def _add_mc(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("Monte Carlo")
    g.add_argument("--seed", type=int, help="master seed (default $CELLCAP_SEED or 42)")
    g.add_argument("--samples", type=int, help="total simulated users per point (default 1e5)")
    g.add_argument("--trials", type=int, help="trials per point; overrides --samples")
    g.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cellcap", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analytic", help="evaluate every formula at one operating point")
    _add_params(p)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("sweep", help="sweep one parameter and emit CSV")
    p.add_argument("--param", required=True,
                   help="lambda_b, lambda_u, gamma_hat_db (alias gamma_db) or alpha")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--paths", help="comma list from: " + ", ".join(experiments.PATHS))
    p.add_argument("--thinning", choices=("dependent", "independent"),
                   help="interferer model for Monte Carlo paths")
    p.add_argument("--out", help="write CSV here instead of stdout")
    _add_params(p)
    _add_mc(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure", help="reproduce a figure as CSV plus gnuplot script")
    p.add_argument("name", choices=experiments.FIGURES)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--shadow-db", dest="shadow_db", type=float,
                   help="fig3a/fig3b: also simulate with this shadowing spread")
    p.add_argument("--config", help="key = value file; flags override it")
    _add_mc(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("compare", help="simulated p_service under dependent vs independent thinning")
    p.add_argument("--thinning", choices=("dependent", "independent", "both"), default="both")
    p.add_argument("--out", help="write CSV here instead of stdout")
    _add_params(p)
    _add_mc(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = read_config(args.config) if getattr(args, "config", None) else {}
        return args.func(args)
    except (UsageError, DomainError, ValueError) as exc:
        print(f"cellcap: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        if getattr(args, "config", None) and exc.filename == args.config:
            print(f"cellcap: error: cannot read config {exc.filename}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"cellcap: I/O error on {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"cellcap: I/O error on {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"cellcap: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
