"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 bad input (parse, validation,
I/O, flags), 3 a resource cap was hit.  With ``--json`` the result goes to
stdout as JSON; human summaries and diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .algebra import DEFAULT_CAP, DEFAULT_WORK_CAP, AlgebraError, FiniteAlgebra
from .certificates import (CertificateError, ModelError, load_certificate, replay, save_certificate,
                           soundness_audit)
from .chains import (ChainError, TermChain, convert_absorption_to_dj, convert_dj_to_simultaneous,
                     convert_pixley_to_hm, convert_pixley_to_jonsson, verify_chain)
from .deciders import NotIdempotentError, decide_all
from .directing import build_directed_core, chain_length_formula, direct_gumm, direct_jonsson
from .terms import Term, TermError, parse_term, parse_terms, print_term

OK, FAIL, BAD_INPUT, RESOURCE = 0, 1, 2, 3

KIND_FLAGS = {"j": "J", "dj": "DJ", "g": "G", "dg": "DG", "p": "P", "hm": "HM"}
CONVERSIONS = {("p", "j"), ("p", "hm"), ("dj", "j+dj"), ("dj", "j"), ("dg", "j+dj"), ("dg", "j"),
               ("abs", "dj")}


class UsageError(Exception):
    """Bad input; reported with exit code 2."""


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=False)
    sys.stdout.write("\n")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not JSON ({exc})") from None


def load_algebra(path) -> Tuple[FiniteAlgebra, Optional[Dict[str, Term]]]:
    """Algebra file, plus the optional "interpretation" object it may carry."""
    data = _read_json(path)
    interp = data.pop("interpretation", None) if isinstance(data, dict) else None
    try:
        A = FiniteAlgebra.from_json(data)
    except AlgebraError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return A, (parse_map(interp, A, str(path)) if interp else None)


def parse_map(raw, A: FiniteAlgebra, where: str) -> Dict[str, Term]:
    if not isinstance(raw, dict):
        raise UsageError(f"{where}: symbol map must be a JSON object")
    out = {}
    for sym, text in raw.items():
        try:
            out[sym] = parse_term(str(text), A.signature)
        except TermError as exc:
            raise UsageError(f"{where}: map entry {sym}: {exc}") from None
    return out


def read_terms(path) -> List[Term]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        terms = parse_terms(lines)
    except TermError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not terms:
        raise UsageError(f"{path}: no terms")
    return terms


def make_chain(terms: List[Term], kind: str, weak: bool = False) -> TermChain:
    """Terms as read from a chain file; for G and DG the last line is the tail."""
    try:
        if kind in ("G", "DG"):
            if len(terms) < 2:
                raise UsageError(f"a {kind} chain file needs its terms and a tail line")
            return TermChain(kind, tuple(terms[:-1]), terms[-1], weak)
        return TermChain(kind, tuple(terms), None, weak)
    except ChainError as exc:
        raise UsageError(str(exc)) from None


def write_chain(chain: TermChain, path: Optional[str]) -> None:
    text = "\n".join(chain.to_lines()) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_decide(args) -> int:
    A, _ = load_algebra(args.algebra)
    t0 = time.perf_counter()
    try:
        report = decide_all(A, max_hm=args.max_hm, max_pixley=args.max_pixley,
                            idempotent_reduct=args.idempotent_reduct, cap=args.cap,
                            work_cap=args.work_cap)
    except NotIdempotentError as exc:
        raise UsageError(f"{exc}; rerun with --idempotent-reduct to use the idempotent reduct") from None
    elapsed = time.perf_counter() - t0
    exceeded = any(r.status == "resource-exceeded" for r in report.results.values())
    if args.json:
        _emit_json(report.to_json())
    else:
        for name, r in report.results.items():
            line = f"{name:18s} {r.status}"
            if r.found:
                line += f"  length {len(r.chain)}"
                if r.k is not None:
                    line += f"  k={r.k}"
                line += "  [" + ", ".join(print_term(t) for t in r.chain.terms) + "]"
                if r.chain.tail is not None:
                    line += f"  tail {print_term(r.chain.tail)}"
            elif r.status == "not-found" and "kmax" in r.params:
                line += f" (k <= {r.params['kmax']})"
            _err(line)
        _err(f"F2 size {report.stats.get('f2', '?')}, {elapsed:.2f}s")
    if exceeded:
        _err(f"resource cap exceeded: {report.stats.get('error', '')}")
        return RESOURCE
    return OK


def cmd_direct(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    t0 = time.perf_counter()
    core = build_directed_core(args.k)
    res = direct_gumm(args.k, core) if args.gumm else direct_jonsson(args.k, core)
    elapsed = time.perf_counter() - t0
    m = len(res.chain)
    formula = chain_length_formula(args.k)
    anomaly = None
    if formula < 1:
        anomaly = (f"closed form gives {formula} at k={args.k}, not a chain length; "
                   "reported only")
    if args.emit_terms:
        write_chain(res.chain, args.emit_terms)
    if args.emit_cert:
        save_certificate(res.certificate, args.emit_cert)
    summary = {"k": args.k, "kind": res.chain.kind, "measured_length": m,
               "formula": str(formula), "certificate": res.certificate.counts(),
               "seconds": round(elapsed, 3)}
    if anomaly:
        summary["anomaly"] = anomaly
    if args.json:
        _emit_json(summary)
    else:
        _err(f"{res.chain.kind} chain for k={args.k}: measured m = {m}, formula = {formula}")
        if anomaly:
            _err(f"note: {anomaly}")
        c = res.certificate.counts()
        _err(f"certificate: {c['steps']} steps ({c['edges']} edges), {elapsed:.2f}s")
    return OK


def cmd_verify(args) -> int:
    A, file_interp = load_algebra(args.algebra)
    chain = make_chain(read_terms(args.chain), KIND_FLAGS[args.kind], args.weak)
    interp = dict(file_interp or {})
    if args.map:
        interp.update(parse_map(_read_json(args.map), A, args.map))
    missing = sorted(s for s in chain.symbols() if s not in A.operations and s not in interp)
    if missing:
        raise UsageError(f"no operation or map entry for chain symbols {missing}")
    try:
        res = verify_chain(A, interp, chain)
    except (ChainError, AlgebraError, TermError) as exc:
        raise UsageError(str(exc)) from None
    if args.json:
        out = {"holds": res.holds, "checked": res.checked}
        if not res.holds:
            out.update(failed=res.label, counterexample=res.counterexample)
        _emit_json(out)
    else:
        _err(f"{chain.kind} chain: {res.describe()}")
    return OK if res.holds else FAIL


def cmd_convert(args) -> int:
    pair = (args.source, args.target)
    if pair not in CONVERSIONS:
        raise UsageError(f"no conversion from {args.source} to {args.target}")
    terms = read_terms(args.chain)
    try:
        if args.source == "p":
            p = make_chain(terms, "P")
            out = convert_pixley_to_jonsson(p) if args.target == "j" else convert_pixley_to_hm(p)
        elif args.source in ("dj", "dg"):
            out = convert_dj_to_simultaneous(make_chain(terms, args.source.upper(), weak=args.weak))
        else:
            if len(terms) != 1:
                raise UsageError("an absorbing term file holds exactly one term")
            out = convert_absorption_to_dj(terms[0])
    except ChainError as exc:
        raise UsageError(str(exc)) from None
    write_chain(out, args.out)
    if args.check:
        A, interp = load_algebra(args.check)
        if args.map:
            interp = dict(interp or {})
            interp.update(parse_map(_read_json(args.map), A, args.map))
        checks = [out]
        if args.target == "j+dj":
            checks.append(TermChain("D" + out.kind, out.terms, out.tail, out.weak))
        holds = True
        for chain in checks:
            res = verify_chain(A, interp, chain)
            _err(f"check {chain.kind}: {res.describe()}")
            holds = holds and res.holds
        return OK if holds else FAIL
    return OK


def _load_models(spec: str, k: int, mode: str, seed: int):
    if spec == "bundled":
        from .models import jonsson_models, w_models
        models = jonsson_models(k, seed) if mode == "full" else w_models(k, seed)
        return [M.pair() for M in models]
    d = Path(spec)
    if not d.is_dir():
        raise UsageError(f"--models: {spec} is not a directory")
    files = sorted(d.glob("*.json"))
    if not files:
        raise UsageError(f"--models: no .json files in {spec}")
    return [load_algebra(f) for f in files]


def cmd_cert_check(args) -> int:
    try:
        cert = load_certificate(args.file)
    except OSError as exc:
        raise UsageError(f"cannot read {args.file}: {exc.strerror}") from None
    except (CertificateError, TermError) as exc:
        raise UsageError(f"{args.file}: {exc}") from None
    if args.k is not None:
        cert.k = args.k
    t0 = time.perf_counter()
    rep = replay(cert)
    out = {"accepted": rep.ok, "k": cert.k, "mode": cert.mode, **cert.counts()}
    if not rep:
        out.update(step=rep.index, reason=rep.reason)
    elif args.models:
        try:
            audit = soundness_audit(cert, _load_models(args.models, cert.k, cert.mode, args.seed))
        except ModelError as exc:
            raise UsageError(f"--models: {exc}") from None
        out["audit"] = audit.ok
        if not audit:
            out.update(accepted=False, step=audit.index, model=audit.model, reason=audit.reason)
    out["seconds"] = round(time.perf_counter() - t0, 3)
    if args.json:
        _emit_json(out)
    elif out["accepted"]:
        _err(f"accepted: {out['steps']} steps, k={cert.k}, mode {cert.mode}")
    else:
        _err(f"rejected at step {out['step']}: {out['reason']}")
    return OK if out["accepted"] else FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable result on stdout")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized steps")

    p = argparse.ArgumentParser(prog="maltsev", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decide", parents=[common], help="run every decider on an algebra file")
    d.add_argument("algebra")
    d.add_argument("--max-hm", type=int, default=8)
    d.add_argument("--max-pixley", type=int, default=8)
    d.add_argument("--idempotent-reduct", action="store_true")
    d.add_argument("--cap", type=int, default=DEFAULT_CAP, help="free algebra size cap")
    d.add_argument("--work-cap", type=int, default=DEFAULT_WORK_CAP, help="closure work cap")
    d.set_defaults(func=cmd_decide)

    r = sub.add_parser("direct", parents=[common], help="build a directed chain from Jchain(k)")
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--gumm", action="store_true")
    r.add_argument("--emit-terms", metavar="FILE")
    r.add_argument("--emit-cert", metavar="FILE")
    r.set_defaults(func=cmd_direct)

    v = sub.add_parser("verify", parents=[common], help="check a chain's equations in an algebra")
    v.add_argument("--algebra", required=True)
    v.add_argument("--chain", required=True)
    v.add_argument("--kind", required=True, choices=sorted(KIND_FLAGS))
    v.add_argument("--map", help="JSON object: chain symbol -> term over the algebra")
    v.add_argument("--weak", action="store_true", help="skip the t(x,y,x)=x equations")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("convert", parents=[common], help="convert between chain kinds")
    c.add_argument("--from", dest="source", required=True, choices=["p", "dj", "dg", "abs"])
    c.add_argument("--to", dest="target", required=True, choices=["j", "hm", "j+dj", "dj"])
    c.add_argument("--chain", required=True)
    c.add_argument("--out", help="output chain file (default stdout)")
    c.add_argument("--check", metavar="ALGEBRA", help="verify the result in this algebra")
    c.add_argument("--map")
    c.add_argument("--weak", action="store_true")
    c.set_defaults(func=cmd_convert)

    k = sub.add_parser("cert-check", parents=[common], help="replay a certificate")
    k.add_argument("file")
    k.add_argument("--k", type=int, help="check against this k instead of the recorded one")
    k.add_argument("--models", help="directory of model files, or 'bundled', for the soundness audit")
    k.set_defaults(func=cmd_cert_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else OK
    try:
        return args.func(args)
    except UsageError as exc:
        _err(f"error: {exc}")
        return BAD_INPUT
    except OSError as exc:
        _err(f"error: {exc}")
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
