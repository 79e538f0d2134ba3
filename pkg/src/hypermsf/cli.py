"""Command-line front end.

Exit codes: 0 success, 2 I/O or parse error, 3 Laplacian construction error
(isolated / catalyst-only vertex), 4 synchronization precluded (no neutral
modes), 5 other domain error, 64 usage error, 70 internal error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources

import numpy as np

from . import io as csvio
from .dynamics import (
    DYNAMICS,
    SCALAR_MAPS,
    CoupledSystem,
    HyperedgeSymmetric,
    LaplacianDiffusive,
    MatrixCoupling,
    SystemState,
    cml_run,
    integrate,
    make_dynamics,
)
from .errors import (
    HypergraphParseError,
    HypergraphValidationError,
    HypermsfError,
    LaplacianError,
    SyncPrecludedError,
)
from .hypercore import is_bipartite, is_graph, load_hypergraph, parse_hypergraph
from .spectral import laplacian, spectral_summary, spectrum
from .stability import lyapunov_exponent, msf_curve, sigma_window, stability_report, verify_window

EXIT_OK = 0
EXIT_IO = 2
EXIT_LAPLACIAN = 3
EXIT_PRECLUDED = 4
EXIT_DOMAIN = 5
EXIT_USAGE = 64
EXIT_INTERNAL = 70

BUILTIN_HYPERGRAPHS = ("splitter", "cyclic3", "allinput4", "k3", "p2")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# argument helpers


def parse_grid(spec: str) -> np.ndarray:
    """``x`` or ``lo:hi:steps`` into an array of values."""
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad grid {spec!r}; expected a number or lo:hi:steps") from None
    if not lo < hi:
        raise UsageError(f"grid {spec!r}: need lo < hi")
    if steps < 2:
        raise UsageError(f"grid {spec!r}: need steps >= 2")
    return np.linspace(lo, hi, steps)


def parse_dynamics(spec: str):
    """``name``, ``name:key=val,...`` or ``name:{json}``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in DYNAMICS:
        raise UsageError(f"unknown dynamics {name!r}; choose from {', '.join(sorted(DYNAMICS))}")
    params = {}
    rest = rest.strip()
    if rest.startswith("{"):
        try:
            params = json.loads(rest)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad dynamics parameters: {exc}") from None
    elif rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise UsageError(f"bad dynamics parameter {item!r}; expected key=value")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise UsageError(f"dynamics parameter {key!r} is not a number") from None
    try:
        return make_dynamics(name, **params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for {name}: {exc}") from None


def read_hypergraph(path: str):
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        if name not in BUILTIN_HYPERGRAPHS:
            raise UsageError(f"unknown built-in hypergraph {name!r}; choose from {BUILTIN_HYPERGRAPHS}")
        text = resources.files("hypermsf").joinpath("data", f"{name}.json").read_text("utf-8")
        return parse_hypergraph(text)
    return load_hypergraph(path)


def emit(args, text: str) -> None:
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(args, obj) -> None:
    emit(args, json.dumps(obj, indent=2, allow_nan=False) + "\n")


def note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _hypergraph_arg(args):
    path = getattr(args, "path", None) or args.hypergraph
    if not path:
        raise UsageError("a hypergraph is required (--hypergraph PATH)")
    return read_hypergraph(path)


def _lambda_max(args, dyn=None, mode=None) -> float:
    if args.lambda_max is not None:
        return args.lambda_max
    if dyn is None:
        if not args.dynamics:
            raise UsageError("give --lambda-max or --dynamics")
        dyn = parse_dynamics(args.dynamics)
    x0 = dyn.sample(np.random.default_rng(args.seed))
    est = lyapunov_exponent(dyn, x0, mode=mode)
    note(f"estimated lambda_max = {est.lambda_max:.6g} ({est.mode}, growth factor {est.growth_factor:.6g})")
    return est.lambda_max


def _initial_state(args, dyn, n: int) -> np.ndarray:
    if args.x0:
        try:
            vals = np.array([float(v) for v in args.x0.split(",")])
        except ValueError:
            raise UsageError(f"bad --x0 {args.x0!r}") from None
        if vals.size == 1:
            return np.full((n, dyn.dim), vals[0])
        if vals.size != n * dyn.dim:
            raise UsageError(f"--x0 needs 1 or {n * dyn.dim} values, got {vals.size}")
        return vals.reshape(n, dyn.dim)
    return dyn.sample(np.random.default_rng(args.seed), (n,))


def _system(args, dyn, sigma: float):
    if not args.hypergraph:
        return CoupledSystem(dyn, MatrixCoupling(np.zeros((1, 1)), dyn))
    H = read_hypergraph(args.hypergraph)
    if args.coupling == "hyperedge":
        if args.g not in SCALAR_MAPS:
            raise UsageError(f"unknown --g {args.g!r}; choose from {sorted(SCALAR_MAPS)}")
        return CoupledSystem(dyn, HyperedgeSymmetric(H, SCALAR_MAPS[args.g], args.aggregator))
    if not 0.0 <= sigma <= 1.0:
        raise UsageError("--sigma must lie in [0, 1]")
    return CoupledSystem(dyn, LaplacianDiffusive(sigma, laplacian(H)))


def _single_sigma(args) -> float:
    grid = parse_grid(args.sigma)
    if grid.size != 1:
        raise UsageError("this command takes a single --sigma value")
    return float(grid[0])


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(args) -> int:
    H = _hypergraph_arg(args)
    s = spectrum(laplacian(H), args.zero_tol)
    summary = spectral_summary(s)
    if args.format == "json":
        emit_json(args, {
            "eigenvalues": [float(v) for v in s.eigenvalues],
            "zero_multiplicity": summary.zero_multiplicity,
            "lambda_min_nonzero": summary.lambda_min_nonzero,
            "lambda_max": summary.lambda_max,
        })
    else:
        emit(args, csvio.spectrum_csv(s))
    if args.vectors:
        if args.vectors_out:
            with open(args.vectors_out, "w", encoding="utf-8", newline="") as fh:
                fh.write(csvio.eigenvectors_csv(s))
        else:
            sys.stdout.write(csvio.eigenvectors_csv(s))
    lam_min = summary.lambda_min_nonzero
    note(
        f"zero multiplicity {summary.zero_multiplicity}, "
        f"smallest nonzero {'none' if lam_min is None else format(lam_min, '.10g')}, "
        f"largest {summary.lambda_max:.10g}"
    )
    if summary.zero_multiplicity == 0:
        note("no neutral modes: synchronized dynamics precluded")
    if is_graph(H):
        bip = is_bipartite(H)
        note(f"graph input: bipartite={bip}, lambda_N==2: {abs(summary.lambda_max - 2.0) <= 1e-9}")
    return EXIT_OK


def cmd_stability(args) -> int:
    H = _hypergraph_arg(args)
    s = spectrum(laplacian(H), args.zero_tol)
    lam = _lambda_max(args)
    report = stability_report(s, lam, _single_sigma(args))
    emit_json(args, report.to_json())
    if report.sync_precluded:
        note("no neutral modes: synchronized dynamics precluded")
    return EXIT_OK


def cmd_window(args) -> int:
    H = _hypergraph_arg(args)
    s = spectrum(laplacian(H), args.zero_tol)
    if s.zero_multiplicity == 0:
        raise SyncPrecludedError("no neutral modes; synchronized dynamics precluded")
    w = sigma_window(s, _lambda_max(args))
    emit_json(args, w.to_json() if w else None)
    return EXIT_OK


def cmd_simulate(args) -> int:
    dyn = parse_dynamics(args.dynamics)
    system = _system(args, dyn, _single_sigma(args))
    x0 = _initial_state(args, dyn, system.n_vertices)
    traj = integrate(system, SystemState(0.0, x0), args.dt, args.t_end, args.dt_out or args.dt)
    emit(args, csvio.trajectory_csv(traj))
    return EXIT_OK


def cmd_cml(args) -> int:
    dyn = parse_dynamics(args.dynamics)
    system = _system(args, dyn, _single_sigma(args))
    x0 = _initial_state(args, dyn, system.n_vertices)
    traj = cml_run(system, SystemState(0.0, x0), args.steps, args.every)
    emit(args, csvio.trajectory_csv(traj))
    return EXIT_OK


def cmd_msf_curve(args) -> int:
    f = parse_dynamics(args.dynamics)
    h = parse_dynamics(args.coupling_dynamics) if args.coupling_dynamics else f
    alphas = parse_grid(args.alpha)
    x0 = _initial_state(args, f, 1)[0]
    curve = msf_curve(
        f, h, alphas, x0, mode=args.mode, t_total=args.t_total, renorm_interval=args.renorm,
        transient=args.transient, dt=args.dt, coupling_constant=args.coupling_constant,
    )
    emit(args, csvio.msf_csv(curve))
    return EXIT_OK


def _verify(args):
    H = _hypergraph_arg(args)
    s = spectrum(laplacian(H), args.zero_tol)
    if s.zero_multiplicity == 0:
        raise SyncPrecludedError("no neutral modes; synchronized dynamics precluded")
    sigmas = parse_grid(args.sigma)
    dyn = parse_dynamics(args.dynamics)
    mode = args.mode or dyn.kind
    lam = _lambda_max(args, dyn, mode)
    window = sigma_window(s, lam)
    threads = args.threads or os.cpu_count() or 1
    return verify_window(
        H, dyn, window, sigmas, args.trials, mode=mode, n_steps=args.steps, dt=args.dt,
        seed=args.seed, threads=threads,
    )


def cmd_sweep(args) -> int:
    report = _verify(args)
    emit(args, csvio.sweep_csv(report.rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    report = _verify(args)
    if args.format == "csv":
        emit(args, csvio.sweep_csv(report.rows))
    else:
        emit_json(args, {
            "window": report.window.to_json() if report.window else None,
            "trials": report.trials,
            "agreement_fraction": report.agreement_fraction,
            "rows": [
                {
                    "sigma": r.sigma,
                    "theory_stable": r.theory_stable,
                    "excluded": r.excluded,
                    "sync_fraction": r.sync_fraction,
                    "mean_final_sync_error": r.mean_final_error if math.isfinite(r.mean_final_error) else None,
                    "agreement": r.agreement,
                }
                for r in report.rows
            ],
        })
    if report.agreement_fraction is not None:
        note(f"agreement fraction {report.agreement_fraction:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, sigma: str = "0.5", dynamics: str | None = None) -> None:
    # added per subcommand (not via parents) so per-command defaults stay separate
    p.add_argument("--hypergraph", help="hypergraph JSON file, or builtin:NAME")
    p.add_argument("--dynamics", default=dynamics, help="name:key=val,... or name:{json}")
    p.add_argument("--sigma", default=sigma, help="value or lo:hi:steps")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--zero-tol", type=float, default=None)
    p.add_argument("--lambda-max", type=float, default=None)
    p.add_argument("--mode", choices=("flow", "map"), default=None)
    p.add_argument("--x0", help="comma-separated initial values (default: random in the dynamics box)")


def _add_coupling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--coupling", choices=("laplacian", "hyperedge"), default="laplacian")
    p.add_argument("--g", default="identity", help=f"hyperedge map: {', '.join(SCALAR_MAPS)}")
    p.add_argument("--aggregator", choices=("arithmetic", "geometric"), default="arithmetic")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypermsf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", help="Laplacian eigenvalues as CSV")
    _add_common(sp)
    sp.add_argument("path", nargs="?", help="hypergraph JSON (alternative to --hypergraph)")
    sp.add_argument("--vectors", action="store_true", help="also write the eigenvector matrix")
    sp.add_argument("--vectors-out", help="path for the eigenvector CSV (default: standard output)")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("stability", help="per-mode stability report (JSON)")
    _add_common(sp)
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("window", help="admissible sigma window (JSON)")
    _add_common(sp)
    sp.set_defaults(func=cmd_window)

    sp = sub.add_parser("simulate", help="RK4 trajectory CSV")
    _add_common(sp)
    _add_coupling(sp)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--t-end", type=float, default=1.0)
    sp.add_argument("--dt-out", type=float, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("cml", help="coupled map lattice trajectory CSV")
    _add_common(sp, dynamics="logistic:r=4")
    _add_coupling(sp)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--every", type=int, default=1)
    sp.set_defaults(func=cmd_cml)

    sp = sub.add_parser("msf-curve", help="master stability function CSV")
    _add_common(sp)
    sp.add_argument("--alpha", default="-2:0:41", help="lo:hi:steps")
    sp.add_argument("--coupling-dynamics", help="h in Df + alpha Dh (default: same as --dynamics)")
    sp.add_argument("--coupling-constant", type=float, default=0.0)
    sp.add_argument("--t-total", type=float, default=None)
    sp.add_argument("--transient", type=float, default=None)
    sp.add_argument("--renorm", type=float, default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.set_defaults(func=cmd_msf_curve)

    for name, func, helptext in (
        ("sweep", cmd_sweep, "sigma sweep: theory vs simulation (CSV)"),
        ("verify", cmd_verify, "empirical window verification (JSON)"),
    ):
        sp = sub.add_parser(name, help=helptext)
        _add_common(sp, sigma="0:1:21")
        sp.add_argument("--trials", type=int, default=20)
        sp.add_argument("--steps", type=int, default=1000)
        sp.add_argument("--dt", type=float, default=0.01)
        sp.set_defaults(func=func)
    return p


_VALUE_FLAGS = ("--alpha", "--sigma", "--x0", "--lambda-max")


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-2:0:41" as an option; glue such values to their flag
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))
    if args.command == "msf-curve" and not args.dynamics:
        parser.error("msf-curve needs --dynamics")
    if args.command in ("simulate", "sweep", "verify") and not args.dynamics:
        parser.error(f"{args.command} needs --dynamics")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        note(f"usage error: {exc}")
        return EXIT_USAGE
    except (OSError, HypergraphParseError, HypergraphValidationError) as exc:
        note(f"error: {exc}")
        return EXIT_IO
    except LaplacianError as exc:
        note(f"error: {exc}")
        return EXIT_LAPLACIAN
    except SyncPrecludedError as exc:
        note(f"error: {exc}")
        return EXIT_PRECLUDED
    except HypermsfError as exc:
        note(f"error: {exc}")
        return EXIT_DOMAIN
    except Exception as exc:  # noqa: BLE001
        note(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
