"""Command-line front end.

Exit codes: 0 when every requested check is identified/compatible, 2 when
some check says "not identified" (or the rank profile did not settle), and 1
on any input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import identify as ident
from . import matrixcore as mc
from . import moments as mom
from . import refixtures as rf
from . import yulewalker as yw
from .errors import NotStabilized, SvarError
from .model import Dims, model_from_dict, restrictions_from_dict

EXIT_OK, EXIT_ERROR, EXIT_NOT_IDENTIFIED = 0, 1, 2


class InputError(Exception):
    """Unreadable or malformed input; mapped to exit code 1."""


@dataclass(frozen=True)
class CliConfig:
    command: str
    inputs: tuple
    out: Optional[Path]
    tol: mc.Tol
    seed: Optional[int]
    trials: Optional[int]
    fmt: str


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _tol(args) -> mc.Tol:
    try:
        return mc.Tol(absolute=args.tol, relative=args.rtol)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def config_from_args(args) -> CliConfig:
    inputs = tuple(v for k in ("model", "cov", "restrictions") if (v := getattr(args, k, None)))
    return CliConfig(args.command, inputs, args.out, _tol(args), args.seed,
                     getattr(args, "trials", None), args.format)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def render_text(doc: dict) -> str:
    """Text form of any JSON document produced by a command.

    Works from the serialized document alone, so a re-parsed report yields
    the same text as the original run.
    """
    cmd = doc.get("command")
    lines: list[str] = []
    if cmd == "analyze":
        lines += [f"warning: {w}" for w in doc.get("warnings", [])]
        if doc.get("noise") is not None:
            lines += ["[noise restrictions]", ident.noise_summary(doc["noise"])]
        if doc.get("system") is not None:
            lines += ["[system restrictions]", ident.system_summary(doc["system"])]
        lines.append(f"verdict: {doc['verdict']}")
    elif cmd == "detect":
        lines += [
            f"p_hat: {doc['p_hat']}",
            f"q_hat: {doc['q_hat']}",
            "rank profile: " + ", ".join(f"Gamma_{r}={k}" for r, k in doc["rank_profile"]),
            f"non-unique: {str(doc['non_unique']).lower()}",
        ]
        lines += [f"L_hat row: {np.array2string(np.asarray(row), precision=6)}" for row in doc["L_hat"]]
        lines += [f"note: {x}" for x in doc["notes"]]
    elif cmd == "solve-yw":
        lines += [
            f"method: {doc['method']}",
            f"p: {doc['p']}, rank Gamma_p: {doc['rank']}, deficiency s: {doc['s']}",
            f"residual: {doc['residual']:.3g}",
            "A+ =",
            np.array2string(np.asarray(doc["a_plus"]), precision=6),
            "Sigma_u =",
            np.array2string(np.asarray(doc["sigma_u"]), precision=6),
        ]
        if doc.get("pivot") is not None:
            lines.append(f"independent rows: {doc['pivot']['independent']}")
    elif cmd == "genericity":
        lines += [
            f"p: {doc['p']}, deficiency s: {doc['s']}",
            f"unique fraction: {doc['fraction']} over {doc['trials']} draws (seed {doc['seed']})",
        ]
    elif cmd == "reproduce-paper":
        for it in doc["items"]:
            lines.append(f"{'PASS' if it['passed'] else 'FAIL'}  {it['name']}: {it['detail']}")
        lines.append(f"all passed: {str(doc['passed']).lower()}")
    else:
        lines.append(json.dumps(doc, indent=2))
    return "\n".join(lines) + "\n"


def emit(doc: dict, cfg: CliConfig) -> None:
    text = json.dumps(doc, indent=2) + "\n" if cfg.fmt == "json" else render_text(doc)
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _load_cov(path) -> mom.CovarianceSequence:
    return mom.CovarianceSequence.from_dict(load_json(path))


def cmd_analyze(args, cfg: CliConfig) -> int:
    if not (args.model or args.cov):
        raise InputError("analyze needs --model and/or --cov")
    warnings: list[str] = []
    mf = model_from_dict(load_json(args.model)) if args.model else None
    m = mf.model if mf else None
    cov = _load_cov(args.cov) if args.cov else None

    if mf is not None:
        noise, system = mf.noise, mf.system
        dims = Dims(m.n, m.q, m.p)
    else:
        p = args.p
        if p is None:
            raise InputError("--p is required when no model file is given")
        dims = Dims(cov.n, args.q or cov.n, p)
        noise, system = None, None
    if args.restrictions:
        doc = load_json(args.restrictions)
        noise_r, system = restrictions_from_dict(doc.get("restrictions", doc), m if m is not None else dims)
        if m is not None:
            noise = noise_r
    if system is None:
        raise InputError("no system restrictions given")

    doc: dict = {"command": "analyze", "tol": cfg.tol.to_dict(), "noise": None, "system": None}
    ok = True
    if m is not None:
        if m.q == m.n:
            warnings.append("q = n: the innovation covariance is nonsingular and the singular-specific checks degenerate")
        rep = ident.check_local_identifiability(m, noise, cfg.tol)
        doc["noise"] = rep.to_dict()
        ok &= bool(rep.compatible and rep.locally_identified)

    if system.r_s or cov is not None:
        p = args.p or dims.p
        if cov is not None:
            ts = mom.build_toeplitz(cov, p, cfg.tol)
        else:
            ts = mom.build_toeplitz(mom.autocovariances(m, p), p, cfg.tol)
        r = system
        if m is not None and not np.allclose(m.a0, np.eye(m.n)):
            r = ident.map_system_restrictions(m, system)
        srep = ident.check_system_restrictions(ts, r, cfg.tol)
        doc["system"] = srep.to_dict()
        ok &= bool(srep.unique_solution)

    doc["warnings"] = warnings
    doc["verdict"] = "identified" if ok else "not identified"
    emit(doc, cfg)
    return EXIT_OK if ok else EXIT_NOT_IDENTIFIED


def cmd_detect(args, cfg: CliConfig) -> int:
    cov = _load_cov(args.cov)
    rmax = args.rmax if args.rmax is not None else cov.horizon + 1
    est = mom.detect_structure(cov, rmax, cfg.tol, k_stab=args.k_stab)
    doc = {
        "command": "detect",
        "p_hat": est.p_hat,
        "q_hat": est.q_hat,
        "L_hat": est.L_hat.tolist(),
        "rank_profile": [list(x) for x in est.rank_profile],
        "non_unique": est.non_unique,
        "notes": list(est.notes),
        "tol": est.tol.to_dict(),
    }
    emit(doc, cfg)
    return EXIT_OK


def _order(cov: mom.CovarianceSequence, p: Optional[int], tol: mc.Tol) -> int:
    if p is not None:
        return p
    return mom.detect_structure(cov, cov.horizon + 1, tol).p_hat


def cmd_solve_yw(args, cfg: CliConfig) -> int:
    cov = _load_cov(args.cov)
    p = _order(cov, args.p, cfg.tol)
    ts = mom.build_toeplitz(cov, p, cfg.tol)
    pivot = None
    if args.method == "pivot":
        sol, sel = yw.pivot_solution(ts)
        pivot = {"independent": list(sel.independent), "dependent": list(sel.dependent)}
    else:
        sol = yw.min_norm_solution(ts)
    doc = {
        "command": "solve-yw",
        "method": args.method,
        "p": p,
        "rank": ts.rank,
        "s": ts.s,
        "vec_a_plus": sol.tolist(),
        "a_plus": yw.as_coefficients(sol, ts.n).tolist(),
        "sigma_u": yw.sigma_from_solution(ts, sol).tolist(),
        "residual": yw.residual(ts, sol),
        "kernel_basis": ts.svd.v_null.tolist(),
        "pivot": pivot,
        "tol": cfg.tol.to_dict(),
    }
    emit(doc, cfg)
    return EXIT_OK


def cmd_simulate(args, cfg: CliConfig) -> int:
    mf = model_from_dict(load_json(args.model))
    path = mom.simulate(mf.model, args.T, cfg.seed)
    text = path.to_csv()
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)
    return EXIT_OK


def cmd_genericity(args, cfg: CliConfig) -> int:
    cov = _load_cov(args.cov)
    p = _order(cov, args.p, cfg.tol)
    ts = mom.build_toeplitz(cov, p, cfg.tol)
    res = ident.genericity_trial(ts, args.trials, cfg.seed, tol=cfg.tol)
    doc = {"command": "genericity", "p": p, "s": ts.s, **res.to_dict()}
    emit(doc, cfg)
    return EXIT_OK if res.fraction == 1.0 else EXIT_NOT_IDENTIFIED


def cmd_reproduce_paper(args, cfg: CliConfig) -> int:
    items = rf.golden_suite(args.beta, args.phi, args.tau, args.kappa)
    passed = rf.suite_passed(items)
    doc = {
        "command": "reproduce-paper",
        "params": {"beta": args.beta, "phi": args.phi, "tau": args.tau, "kappa": args.kappa},
        "items": [it.to_dict() for it in items],
        "passed": passed,
    }
    emit(doc, cfg)
    return EXIT_OK if passed else EXIT_NOT_IDENTIFIED


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="absolute singular-value cutoff")
    common.add_argument("--rtol", type=float, default=None,
                        help="relative cutoff factor (times sigma_max * max(dims)); default machine epsilon")
    common.add_argument("--format", choices=("json", "text"), default="text")
    common.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
    common.add_argument("--seed", type=_seed, default=None)

    parser = argparse.ArgumentParser(prog="singular-svar",
                                     description="Identifiability of SVARs with singular innovation covariance.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="noise and system identifiability reports")
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--cov", help="covariance JSON file (replaces population covariances of the model)")
    p.add_argument("--restrictions", help="restriction JSON file (overrides those in the model file)")
    p.add_argument("--p", type=int, default=None, help="YW order (default: the model's p)")
    p.add_argument("--q", type=int, default=None, help="shock count when no model is given")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("detect", parents=[common], help="estimate (p, q, L) from a rank profile")
    p.add_argument("cov")
    p.add_argument("--rmax", type=int, default=None, help="largest Toeplitz order (default: horizon + 1)")
    p.add_argument("--k-stab", type=int, default=2, help="increments that must agree")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("solve-yw", parents=[common], help="particular YW solution")
    p.add_argument("cov")
    p.add_argument("--p", type=int, default=None, help="YW order (default: detected)")
    p.add_argument("--method", choices=("pivot", "minnorm"), default="minnorm")
    p.set_defaults(func=cmd_solve_yw)

    p = sub.add_parser("simulate", parents=[common], help="simulate a sample path as CSV")
    p.add_argument("model")
    p.add_argument("-T", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("genericity", parents=[common], help="fraction of random C_S giving uniqueness")
    p.add_argument("cov")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_genericity)

    p = sub.add_parser("reproduce-paper", parents=[common], help="run the New-Keynesian golden suite")
    p.add_argument("--beta", type=float, default=0.8)
    p.add_argument("--phi", type=float, default=39 / 38)
    p.add_argument("--tau", type=float, default=0.75)
    p.add_argument("--kappa", type=float, default=0.5)
    p.set_defaults(func=cmd_reproduce_paper)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        cfg = config_from_args(args)
        return args.func(args, cfg)
    except NotStabilized as exc:
        print(f"not identified: {exc}", file=sys.stderr)
        return EXIT_NOT_IDENTIFIED
    except (InputError, SvarError, ValueError, KeyError, TypeError) as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
