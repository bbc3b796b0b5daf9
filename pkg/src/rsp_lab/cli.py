"""Command-line entry point (``rsp-lab`` / ``python -m rsp_lab``).

Exit codes: 0 success, 1 an audited flag failed, 2 input or usage error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from rsp_lab import __version__, capacity, qmath, report
from rsp_lab.classical import classical_audit, classical_plan, classical_run, load_distributions
from rsp_lab.config import Tolerances
from rsp_lab.ensemble import average_state, builtin, encoding_to_document, load_ensemble, parse_ensemble, perturb
from rsp_lab.errors import InputError, NumericalError, UnknownLabel
from rsp_lab.protocol import audit, plan, run_analytic, run_sampled
from rsp_lab.substate import substate_decompose, verify_certificate

EXIT_OK, EXIT_AUDIT, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3
U64_MAX = 2 ** 64 - 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_INPUT, f"\n{self.prog}: error: {message}\n")


def _epsilon(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1), got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _tol_pair(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip().lower(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance value must be a number, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--output", type=Path, help="write the report here instead of stdout")
    common.add_argument("--tol", action="append", type=_tol_pair, default=[], metavar="NAME=VALUE",
                        help="override a tolerance (also settable via RSP_LAB_TOL_<NAME>)")

    proto = argparse.ArgumentParser(add_help=False)
    proto.add_argument("--epsilon", type=_epsilon, default=0.5)
    proto.add_argument("--mode", choices=("paper", "tight"), default="tight")
    proto.add_argument("--copies", choices=("paper", "robust"), default="robust")
    proto.add_argument("--r", type=float, help="override r = 4/epsilon^2")
    proto.add_argument("--x", help="input label (required for run)")
    proto.add_argument("--seed", type=_seed, help="sampled run with this seed; analytic run without")

    p = _Parser(prog="rsp-lab", description="Maximum possible information, substate certificates and "
                                              "remote state preparation protocols.")
    p.add_argument("--version", action="version", version=f"rsp-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("capacity", parents=[common], help="T(E) by Blahut-Arimoto")
    c.add_argument("ensemble", help="ensemble file or builtin:<name>")
    c.add_argument("--brute-force", type=float, metavar="STEP", help="also grid-search with this step")

    m = sub.add_parser("minimax", parents=[common], help="mu* with S(rho_x||rho_mu*) <= T for all x")
    m.add_argument("ensemble")
    m.add_argument("--slack", type=float, default=1e-6)

    s = sub.add_parser("substate", parents=[common], help="substate certificate for one input")
    s.add_argument("ensemble")
    s.add_argument("--x", required=True)
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--mode", choices=("paper", "tight"), default="tight")

    for name, what, src in (("rsp", "quantum protocol", "ensemble file or builtin:<name>"),
                            ("classical", "classical rejection-sampling protocol",
                             "distribution file or builtin:<diagonal name>")):
        g = sub.add_parser(name, help=what)
        gs = g.add_subparsers(dest="action", required=True, parser_class=_Parser)
        for action in ("plan", "run", "audit"):
            a = gs.add_parser(action, parents=[common, proto])
            a.add_argument("ensemble", help=src)

    f = sub.add_parser("fannes", parents=[common], help="continuity bound on |T(E) - T(E')|")
    f.add_argument("ensemble")
    f.add_argument("ensemble_prime")

    pt = sub.add_parser("perturb", parents=[common], help="perturbed copy of an ensemble (ensemble file)")
    pt.add_argument("ensemble")
    pt.add_argument("--epsilon", type=float, required=True)
    pt.add_argument("--seed", type=_seed, default=0)
    pt.add_argument("--strategy", choices=("depolarize", "random"), default="depolarize")
    return p


def _tolerances(pairs) -> Tolerances:
    tol = Tolerances.from_env()
    if pairs:
        try:
            tol = tol.replace(**dict(pairs))
        except KeyError as err:
            raise InputError(err.args[0]) from None
    return tol


def _load(source: str, tol: Tolerances):
    """``builtin:<name>``, an ensemble file, or a JSON report from ``perturb``."""
    if source.startswith("builtin:"):
        return builtin(source.split(":", 1)[1]), None
    text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        return load_ensemble(text, tol)  # reports the parse position
    if isinstance(doc, dict) and doc.get("command") == "perturb" and "result" in doc:
        doc = doc["result"]
    return parse_ensemble(doc, tol)


def _require_x(args, labels):
    if args.x is None:
        raise InputError("--x is required for run")
    if args.x not in labels:
        raise UnknownLabel(f"label {args.x!r} not found; labels are {list(labels)}")
    return args.x


def _execute(args, tol: Tolerances) -> tuple[str, dict, dict, bool]:
    """Returns (command name, config, result, audit passed)."""
    cmd = args.command
    config = {"input": args.ensemble, "tolerances": tol.as_dict()}
    ok = True
    if cmd == "capacity":
        e, _ = _load(args.ensemble, tol)
        result = report.capacity_dict(capacity.solve_capacity(e, tol=tol))
        if args.brute_force is not None:
            config["brute_force_step"] = args.brute_force
            result["brute_force"] = report.brute_force_dict(capacity.brute_force_capacity(e, args.brute_force))
    elif cmd == "minimax":
        e, _ = _load(args.ensemble, tol)
        res = capacity.solve_capacity(e, tol=tol)
        result = report.minimax_dict(res, args.slack)
        config["slack"] = args.slack
        ok = result["bound_holds"]
    elif cmd == "substate":
        e, _ = _load(args.ensemble, tol)
        x = _require_x(args, e.labels)
        res = capacity.solve_capacity(e, tol=tol)
        rho_mu = average_state(e, res.mu_star)
        cert = substate_decompose(e[x], rho_mu, args.r, args.mode, tol)
        rep = verify_certificate(cert, e[x], rho_mu, tol)
        result = report.certificate_dict(x, cert, rep)
        config.update(x=x, r=args.r, mode=args.mode)
        ok = rep.passed
    elif cmd in ("rsp", "classical"):
        cmd = f"{cmd} {args.action}"
        config.update(epsilon=args.epsilon, mode=args.mode, copy_policy=args.copies, r=args.r,
                      x=args.x, seed=args.seed)
        if args.command == "rsp":
            e, _ = _load(args.ensemble, tol)
            if args.action == "audit":
                a = audit(e, args.epsilon, args.mode, args.copies, r=args.r, tol=tol)
                result, ok = report.audit_dict(a), a.passed
            else:
                pl = plan(e, args.epsilon, args.mode, args.copies, r=args.r, tol=tol)
                if args.action == "plan":
                    result = report.plan_dict(pl)
                else:
                    x = _require_x(args, e.labels)
                    out = run_analytic(pl, x) if args.seed is None else run_sampled(pl, x, args.seed)
                    result = report.outcome_dict(out)
        else:
            dists, base = load_distributions(args.ensemble)
            if args.action == "audit":
                a = classical_audit(dists, base, args.epsilon, args.mode, args.copies, r=args.r)
                result, ok = report.classical_audit_dict(a), a.passed
            else:
                pl = classical_plan(dists, base, args.epsilon, args.mode, args.copies, r=args.r)
                if args.action == "plan":
                    result = report.classical_plan_dict(pl)
                else:
                    x = _require_x(args, list(dists))
                    result = report.classical_outcome_dict(classical_run(pl, x, args.seed))
    elif cmd == "fannes":
        e, _ = _load(args.ensemble, tol)
        e2, _ = _load(args.ensemble_prime, tol)
        bound = capacity.fannes_bound(e, e2)
        t1 = capacity.solve_capacity(e, tol=tol).value
        t2 = capacity.solve_capacity(e2, tol=tol).value
        dist = max(qmath.trace_distance(a, b) for a, b in zip(e.states, e2.states))
        result = {"unit": report.UNIT, "T": t1, "T_prime": t2, "delta": abs(t1 - t2), "bound": bound,
                  "max_trace_distance": dist, "holds": bool(abs(t1 - t2) <= bound + tol.capacity)}
        config["input_prime"] = args.ensemble_prime
        ok = result["holds"]
    elif cmd == "perturb":
        e, mu = _load(args.ensemble, tol)
        result = encoding_to_document(perturb(e, args.epsilon, args.seed, args.strategy), mu)
        config.update(epsilon=args.epsilon, seed=args.seed, strategy=args.strategy)
    else:  # pragma: no cover - argparse restricts the choices
        raise InputError(f"unknown command {cmd!r}")
    return cmd, config, result, bool(ok)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        tol = _tolerances(args.tol)
        cmd, config, result, ok = _execute(args, tol)
    except (InputError, ValueError, OSError) as err:
        print(f"rsp-lab: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as err:
        print(f"rsp-lab: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    doc = report.envelope(cmd, config, result)
    text = report.to_json(doc) if args.format == "json" else report.to_text(doc)
    if args.output is not None:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_AUDIT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
