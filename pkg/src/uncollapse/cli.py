"""Command-line front end: fidelity sweeps, p_u optimization and Monte Carlo validation.

Exit codes: 0 success, 1 usage error, 2 infeasible configuration,
3 validation mismatch, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor


from . import __version__
from .analysis import SIX_STATES, avg_fidelity_general, baseline_fidelity
from .core import make_pure, state_fidelity
from .errors import (
    DomainError,
    EmptySelectionError,
    ImpossibleSelectionError,
    InfeasibleMatchingError,
    InfeasibleTargetError,
    InvalidStateError,
)
from .optimize import choose_pu, optimize_pu, parse_strategy
from .oracle import GENERATOR, mc_run
from .protocol import ProtocolParams, final_density_matrix, printed_branch_labels, run_general

log = logging.getLogger("uncollapse")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_MISMATCH, EXIT_IO = 0, 1, 2, 3, 4
Z_LIMIT = 4.0
CSV_COLUMNS = ("p", "p_u", "C", "F_av_s", "F_chi", "P_f_avg", "F_baseline")

PRESETS = {
    "fig2": dict(kappa1=1.0, kappa2=0.3, kappa3=1.0, kappa4=1.0, kappa_phi=1.0),
    "fig3-a": dict(kappa1=1.0, kappa2=0.3, kappa3=1.0, kappa4=1.0, kappa_phi=0.95),
    "fig3-b": dict(kappa1=0.999, kappa2=0.3, kappa3=0.999, kappa4=0.999, kappa_phi=0.95),
    "fig3-c": dict(kappa1=0.99, kappa2=0.3, kappa3=0.99, kappa4=0.99, kappa_phi=0.95),
    "fig3-d": dict(kappa1=0.9, kappa2=0.3, kappa3=0.9, kappa4=0.9, kappa_phi=0.95),
}
KAPPAS = ("kappa1", "kappa2", "kappa3", "kappa4", "kappa_phi")


class UsageError(Exception):
    pass


def fmt(value) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "NA"
    return format(float(value), ".9g")


def _add_param_flags(parser):
    parser.add_argument("--preset", choices=sorted(PRESETS))
    for i in range(1, 5):
        parser.add_argument(f"--kappa{i}", type=float)
    parser.add_argument("--kappa-phi", type=float)
    parser.add_argument("--gamma", type=float, help="relaxation rate 1/T1")
    for i in range(1, 5):
        parser.add_argument(f"--tau{i}", type=float, help=f"duration of segment {i}")
    parser.add_argument("--gamma-phi", type=float, help="pure dephasing rate")
    parser.add_argument("--pu", default="matched",
                        help="matched | equal | fixed:V | optimal | optimal-pf:V")


def resolve_kappas(args) -> dict:
    """Decay factors from preset, rate/duration flags and explicit kappa flags, in that order."""
    kappas = dict(PRESETS[args.preset]) if args.preset else {k: 1.0 for k in KAPPAS}
    taus = [getattr(args, f"tau{i}") for i in range(1, 5)]
    if args.gamma is not None or args.gamma_phi is not None:
        taus = [0.0 if t is None else t for t in taus]
        if any(t < 0 for t in taus):
            raise UsageError("segment durations must be non-negative")
        from_rates = {}
        if args.gamma is not None:
            for i, t in enumerate(taus, 1):
                from_rates[f"kappa{i}"] = math.exp(-args.gamma * t)
        if args.gamma_phi is not None:
            from_rates["kappa_phi"] = math.exp(-args.gamma_phi * sum(taus))
        for name, value in from_rates.items():
            if getattr(args, name) is not None:
                log.warning("both %s and rate/duration given; using %s", name, name)
            else:
                kappas[name] = value
    elif any(t is not None for t in taus):
        raise UsageError("--tau flags need --gamma or --gamma-phi")
    for name in KAPPAS:
        value = getattr(args, name)
        if value is not None:
            kappas[name] = value
    return kappas


def _header(args, kappas, extra=()):
    lines = [f"# uncollapse {__version__}",
             f"# preset: {args.preset or 'custom'}",
             "# " + " ".join(f"{k}={fmt(v)}" for k, v in kappas.items()),
             f"# pu_strategy: {args.pu}"]
    lines.extend(f"# {item}" for item in extra)
    return lines


def sweep_row(p: float, template: ProtocolParams, strategy) -> list[str]:
    params = template.with_p(p)
    baseline = baseline_fidelity(params.kappa_E, params.kappa_phi)
    C = (1.0 - p) * (1.0 - params.kappa2)
    try:
        p_u = choose_pu(strategy, params)
        report = avg_fidelity_general(params.with_pu(p_u))
    except (InfeasibleMatchingError, InfeasibleTargetError, ImpossibleSelectionError) as exc:
        log.warning("p=%s: %s", fmt(p), exc)
        return [fmt(p), "NA", fmt(C), "NA", "NA", "NA", fmt(baseline)]
    return [fmt(p), fmt(p_u), fmt(C), fmt(report.F_av_s), fmt(report.F_chi),
            fmt(report.P_f_avg), fmt(baseline)]


def grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or start > stop:
        raise UsageError("need start <= stop and step > 0")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def cmd_sweep(args) -> int:
    kappas = resolve_kappas(args)
    template = ProtocolParams(**kappas)
    strategy = parse_strategy(args.pu)
    points = grid(args.p_start, args.p_stop, args.p_step)
    for p in points:
        if not 0.0 <= p <= 1.0:
            raise UsageError("p grid must lie within [0, 1]")
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(lambda p: sweep_row(p, template, strategy), points))

    lines = _header(args, kappas, ["seed: none", f"grid: p={fmt(args.p_start)}..{fmt(args.p_stop)} "
                                                f"step {fmt(args.p_step)}"])
    lines.append(",".join(CSV_COLUMNS))
    lines.extend(",".join(row) for row in rows)
    text = "\n".join(lines) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            log.error("cannot write %s: %s", args.out, exc)
            return EXIT_IO
    return EXIT_OK


def cmd_optimize_pu(args) -> int:
    kappas = resolve_kappas(args)
    params = ProtocolParams(p=args.p, **kappas)
    mode = "max-F" if args.target is None else "max-F-at-fixed-Pf"
    choice = optimize_pu(params, mode, args.target)
    print("\n".join(_header(args, kappas, [f"mode: {mode}"])))
    print("p,p_u,F_av_s,P_f_avg")
    print(",".join(fmt(v) for v in (args.p, choice.p_u, choice.F_av_s, choice.P_f_avg)))
    return EXIT_OK


def _z(mc: float, exact: float, se: float) -> float:
    diff = abs(mc - exact)
    if se == 0.0:
        return 0.0 if diff <= 1e-12 else math.inf
    return diff / se


def validate_state(psi, params, n, seed, corrupt_labels=False):
    """Rows ``(quantity, analytic, mc, std_err, z)`` comparing closed form and Monte Carlo."""
    d = run_general(psi, params)
    if corrupt_labels:
        d = printed_branch_labels(d)
    exact = final_density_matrix(d)
    est = mc_run(psi, params, n, seed)
    se = est.std_err_entries
    rows = [
        ("P_f", exact.P_f, est.P_f_hat, est.std_err_Pf),
        ("rho00", exact.rho_f.rho00, est.rho_hat.rho00, se[0, 0]),
        ("rho11", exact.rho_f.rho11, est.rho_hat.rho11, se[1, 1]),
        ("rho01", exact.rho_f.rho01, est.rho_hat.rho01, se[0, 1]),
    ]
    rows.append(("F_st", state_fidelity(exact.rho_f, psi), est.F_st_hat, est.std_err_Fst))
    return [(name, a, m, s, _z(m, a, s)) for name, a, m, s in rows]


def parse_state(text: str):
    if text == "six":
        return list(SIX_STATES)
    try:
        parts = [complex(x.replace(" ", "")) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse state {text!r}") from None
    if len(parts) != 2:
        raise UsageError("state needs two amplitudes 'a0,a1' or 'six'")
    return [make_pure(*parts)]


def cmd_mc_validate(args) -> int:
    kappas = resolve_kappas(args)
    params = ProtocolParams(p=args.p, **kappas)
    params = params.with_pu(choose_pu(parse_strategy(args.pu), params))
    states = parse_state(args.state)
    print("\n".join(_header(args, kappas, [f"p={fmt(params.p)} p_u={fmt(params.p_u)}",
                                           f"seed: {args.seed} generator: {GENERATOR} n: {args.n}"])))
    print("state,quantity,analytic,mc,std_err,z")
    worst = 0.0
    for k, psi in enumerate(states):
        label = f"{psi.amp0:.6g};{psi.amp1:.6g}"
        try:
            rows = validate_state(psi, params, args.n, args.seed + k, args.corrupt_labels)
        except (EmptySelectionError, ImpossibleSelectionError) as exc:
            print(f"{label},selection,NA,NA,NA,NA")
            log.error("%s: %s", label, exc)
            return EXIT_INFEASIBLE
        for name, a, m, s, z in rows:
            av = fmt(a) if not isinstance(a, complex) else f"{a:.9g}"
            mv = fmt(m) if not isinstance(m, complex) else f"{m:.9g}"
            print(f"{label},{name},{av},{mv},{fmt(s)},{fmt(z)}")
            worst = max(worst, z)
    verdict = "PASS" if worst <= Z_LIMIT else "FAIL"
    print(f"# max |z| = {fmt(worst)} (limit {Z_LIMIT:g}): {verdict}")
    return EXIT_OK if worst <= Z_LIMIT else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uncollapse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="fidelity and selection probability versus p (CSV)")
    _add_param_flags(sweep)
    sweep.add_argument("--p-start", type=float, default=0.0)
    sweep.add_argument("--p-stop", type=float, default=0.99)
    sweep.add_argument("--p-step", type=float, default=0.01)
    sweep.add_argument("--out", help="output file (default stdout)")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.set_defaults(func=cmd_sweep)

    opt = sub.add_parser("optimize-pu", help="numerically optimize the second strength")
    _add_param_flags(opt)
    opt.add_argument("--p", type=float, required=True)
    opt.add_argument("--target", type=float, help="fixed average selection probability")
    opt.set_defaults(func=cmd_optimize_pu)

    mc = sub.add_parser("mc-validate", help="compare closed forms with Monte Carlo trajectories")
    _add_param_flags(mc)
    mc.add_argument("--p", type=float, default=0.5)
    mc.add_argument("--n", type=int, default=1_000_000)
    mc.add_argument("--seed", type=int, default=20100101)
    mc.add_argument("--state", default="1,1", help="'a0,a1' amplitudes or 'six'")
    mc.add_argument("--corrupt-labels", action="store_true", help=argparse.SUPPRESS)
    mc.set_defaults(func=cmd_mc_validate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (InfeasibleMatchingError, InfeasibleTargetError, ImpossibleSelectionError) as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    except (UsageError, DomainError, InvalidStateError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
