"""Command line front end.

Every subcommand writes a merged report file (--out) in the common schema and
exits 0 when no report failed, 1 when one did and 2 on malformed input.
A SOURCE is either a structure file written by `gen` or a family name.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import boundary as bd
from . import examples as ex
from .hhs_core.axioms import check_all
from .hhs_core.structure import HhsStructure, StructureError
from .maximization import (LEMMAS, MaximizationError, check_maximized, maximize, verify_coned_hyperbolicity,
                           verify_gate_vs_cpp, verify_hierarchy_path_transfer, verify_hqc_transfer,
                           verify_y_quasiconvex)
from .metric_graph import GraphError
from .models import ModelError, ModelSpec, build_model, build_radius_ladder
from .report import FAIL, CheckReport, canonical, load_merged, merge_reports

BOUNDARY_ACTIONS = ("membership", "neighborhood", "convergence", "projection", "phi")


class InputError(ValueError):
    pass


# ---------------------------------------------------------------- parsing helpers

def _radii(text: str) -> list[int]:
    try:
        out = sorted({int(t) for t in text.split(",") if t.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"radii must be comma separated integers: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty radius list")
    return out


def _params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise InputError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _spec(args, radius=None) -> ModelSpec:
    return ModelSpec.parse(args.source, radius or args.radius, args.seed, **_params(args.param))


def _build(args, radius=None):
    return build_model(_spec(args, radius), E=args.E, d_inf=args.d_inf, kappa_p=args.kappa_p)


def _is_file(source: str) -> bool:
    return Path(source).suffix == ".json" or Path(source).is_file()


def _structure(args) -> HhsStructure:
    if _is_file(args.source):
        try:
            return HhsStructure.load(args.source)
        except FileNotFoundError:
            raise InputError(f"no such structure file: {args.source}") from None
        except json.JSONDecodeError as e:
            raise InputError(f"structure file is not JSON: {e}") from None
    return _build(args).structure


def _ladder(args):
    radii = args.radii or [args.radius]
    return build_radius_ladder(_spec(args, radii[0]), radii, E=args.E, d_inf=args.d_inf, kappa_p=args.kappa_p)


def _load_json(text_or_path: str):
    p = Path(text_or_path)
    try:
        raw = p.read_text(encoding="utf-8") if p.is_file() else text_or_path
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise InputError(f"not JSON: {text_or_path!r} ({e})") from None


def _proxy(h, text: str) -> bd.BoundaryProxy:
    data = _load_json(text)
    try:
        p = bd.BoundaryProxy.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"proxy definition: expected {{'support': [{{domain, horizon, coefficient}}]}} ({e})") \
            from None
    return bd.validate_proxy(h, p)


def _vertex(g, token):
    """A vertex id or a word label."""
    if isinstance(token, int) or (isinstance(token, str) and token.lstrip("-").isdigit()):
        v = int(token)
        if not 0 <= v < g.n:
            raise InputError(f"vertex {v} out of range")
        return v
    return g.vertex_of("" if token in ("e", "1") else token)


# ---------------------------------------------------------------- subcommands

def cmd_gen(args) -> list[CheckReport]:
    m = _build(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.source}-r{m.spec.radius}"
    m.graph.save(out / f"{stem}.graph.json")
    m.structure.save(out / f"{stem}.structure.json")
    rep = CheckReport("gen", m.spec.to_dict(), {"E": m.structure.E, "kappa_P": m.structure.kappa_p,
                                                "D_inf": m.structure.d_inf})
    rep.record(m.spec.radius, vertices=m.graph.n, domains=len(m.structure.names),
               files=[f"{stem}.graph.json", f"{stem}.structure.json"])
    return [rep]


def cmd_check_axioms(args) -> list[CheckReport]:
    return check_all(_structure(args), args.budget, args.seed, tuple(args.skip or ()))


def cmd_maximize(args) -> list[CheckReport]:
    h = _structure(args)
    mr = maximize(h)
    rep = CheckReport("maximize", dict(h.model or {}), {"E": h.E, "kappa_P": h.kappa_p, "D_inf": h.d_inf})
    rep.record(h.radius, **mr.summary(), coned_diameter=mr.coned.diameter())
    rep.flags.append(mr.summary()["flags"][0])
    out = [rep]
    if args.save_t:
        mr.t_structure.save(args.save_t)
    if args.check:
        out += check_maximized(mr, budget=args.budget, seed=args.seed)
    return out


def cmd_verify(args) -> list[CheckReport]:
    lemma = args.lemma
    if args.radii is None:
        args.radii = list({"hqc-transfer": ex.HQC_LADDERS}.get(lemma, ex.PATH_LADDERS).get(args.source, [args.radius]))
    mrs = [maximize(m.structure) for m in _ladder(args)]
    if lemma == "hierarchy-path-transfer":
        return [verify_hierarchy_path_transfer(mrs, n_paths=args.n_paths, seed=args.seed)]
    if lemma == "hqc-transfer":
        return [verify_hqc_transfer(mrs, ex.hqc_subsets(args.source), seed=args.seed)]
    if lemma == "gate-vs-cpp":
        return [verify_gate_vs_cpp(mrs, ex.gate_subsets(args.source), n_points=args.n_points, seed=args.seed)]
    if lemma == "y-quasiconvex":
        return [verify_y_quasiconvex(mrs)]
    return [verify_coned_hyperbolicity(mrs, budget=args.budget, seed=args.seed)]


def _check_maximization_file(mr, path):
    if not path:
        return
    saved = [r for r in load_merged(Path(path).read_text(encoding="utf-8")) if r.check == "maximize"]
    if not saved:
        raise InputError(f"{path}: no maximize report")
    T = next(iter(saved[0].constants.values()))["T"]
    if list(T) != list(mr.T):
        raise InputError(f"{path}: recorded T {T} differs from the recomputed T {mr.T}")


def cmd_boundary(args) -> list[CheckReport]:
    h = _structure(args)
    mr = maximize(h)
    _check_maximization_file(mr, args.maximization)
    hs = mr.source
    model = dict(hs.model or {})
    act = args.action
    if act == "neighborhood":
        if args.domain is None or args.horizon is None:
            raise InputError("neighborhood needs --domain and --horizon")
        rs = args.rs or list(range(10))
        return [bd.check_transfer_neighborhood(mr, args.domain, _vertex(hs.graph(args.domain), args.horizon), rs)]
    if args.proxy is None:
        raise InputError(f"{act} needs --proxy")
    p = _proxy(hs, args.proxy)
    if act == "phi":
        rep = CheckReport("phi", model, {"proxy": p.to_dict()})
        pb = bd.phi(mr, p)
        rep.record(hs.radius, phi=pb.to_dict(), support_size=[len(p.support), len(pb.support)])
        if len(pb.support) != len(p.support) or sorted(a for *_, a in pb.support) != sorted(a for *_, a in p.support):
            rep.fail({"phi": pb.to_dict()}, "phi changed support size or coefficients")
        return [rep]
    if act == "projection":
        if args.other is None:
            raise InputError("projection needs --other (the proxy q)")
        q = _proxy(hs, args.other)
        return [bd.verify_boundary_projection_transfer(mr, p, q, args.domain)]
    eps = Fraction(args.eps)
    if act == "membership":
        params = bd.BasicSetParams(Fraction(args.r), eps)
        rep = CheckReport("basic-set-membership", model, {"proxy": p.to_dict(), "r": args.r, "eps": eps})
        for tok in args.candidate or ():
            cand = _proxy(hs, tok) if tok.lstrip().startswith("{") else _vertex(hs.ambient, tok)
            mem = bd.basic_set_membership(hs, p, params, cand)
            rep.record(hs.radius, **{str(tok): {"part": mem.part, "conditions": mem.conditions}})
        return [rep]
    seq = _load_json(args.sequence) if args.sequence else None
    if not isinstance(seq, list):
        raise InputError("convergence needs --sequence: a JSON list of vertex ids or words")
    verts = [_vertex(hs.ambient, t) for t in seq]
    return [bd.convergence_transfer_experiment(mr, p, verts, Fraction(args.r), eps, tail=args.tail,
                                               R=args.perturbation, name=Path(args.sequence).name)]


def cmd_classify(args) -> list[CheckReport]:
    models = _ladder(args)
    D = None if args.d_big is None else Fraction(args.d_big)
    return [bd.classification_report(models, args.word, args.K, D)]


def cmd_report(args) -> list[CheckReport]:
    reports = []
    for f in args.files:
        try:
            reports += load_merged(Path(f).read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError) as e:
            raise InputError(f"{f}: {e}") from None
    return reports


# ---------------------------------------------------------------- parser

def _common(p, source=True):
    if source:
        p.add_argument("source", help="family name (grid-Z2, free-F2, ...) or structure file")
    p.add_argument("--radius", type=int, default=6)
    p.add_argument("--radii", type=_radii, default=None, help="comma separated radius ladder")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=200_000, help="sampled triples/pairs per check")
    p.add_argument("--E", type=Fraction, default=None)
    p.add_argument("--kappa-p", dest="kappa_p", type=Fraction, default=None)
    p.add_argument("--d-inf", dest="d_inf", type=Fraction, default=None)
    p.add_argument("--d-big", dest="d_big", type=Fraction, default=None)
    p.add_argument("--horizon", default=None, help="horizon vertex id or word")
    p.add_argument("--param", action="append", help="family parameter key=value")
    p.add_argument("--out", default="hhsmax-report.json", help="merged report file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hhsmax", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write graph and structure files for a family")
    _common(p)
    p.add_argument("--out-dir", default=".", help="directory for the graph and structure files")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("check-axioms", help="run the eleven axiom checks")
    _common(p)
    p.add_argument("--skip", action="append", help="axiom number or name to skip")
    p.set_defaults(fn=cmd_check_axioms)

    p = sub.add_parser("maximize", help="maximize a structure")
    _common(p)
    p.add_argument("--save-t", default=None, help="write the T-structure here")
    p.add_argument("--check", action="store_true", help="also run the axiom checks on the result")
    p.set_defaults(fn=cmd_maximize)

    p = sub.add_parser("verify", help="verify a transfer lemma across a radius ladder")
    p.add_argument("lemma", choices=LEMMAS)
    _common(p)
    p.add_argument("--n-paths", type=int, default=50)
    p.add_argument("--n-points", type=int, default=100)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("boundary", help="boundary proxies, basic sets and transfer")
    p.add_argument("action", choices=BOUNDARY_ACTIONS)
    _common(p)
    p.add_argument("--maximization", default=None, help="maximize report to check T against")
    p.add_argument("--proxy", default=None, help="proxy JSON (file or inline)")
    p.add_argument("--other", default=None, help="second proxy q for projection")
    p.add_argument("--domain", default=None)
    p.add_argument("--candidate", action="append", help="vertex id, word or proxy JSON")
    p.add_argument("--sequence", default=None, help="JSON list of vertex ids or words")
    p.add_argument("--r", type=Fraction, default=Fraction(1))
    p.add_argument("--eps", type=Fraction, default=Fraction(1, 2))
    p.add_argument("--rs", type=_radii, default=None, help="r grid for neighborhood")
    p.add_argument("--tail", type=int, default=None)
    p.add_argument("--perturbation", type=int, default=2)
    p.set_defaults(fn=cmd_boundary)

    p = sub.add_parser("classify", help="big set and classification of a group element")
    _common(p)
    p.add_argument("word")
    p.add_argument("--K", type=int, default=4)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("report", help="report utilities")
    rsub = p.add_subparsers(dest="report_command", required=True)
    m = rsub.add_parser("merge", help="merge report files deterministically")
    m.add_argument("files", nargs="+")
    m.add_argument("--out", default="hhsmax-report.json")
    m.set_defaults(fn=cmd_report)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        reports = args.fn(args)
    except (InputError, StructureError, GraphError, ModelError, bd.BoundaryError, MaximizationError) as e:
        err = CheckReport("input", {}, {"command": args.command}, verdict=FAIL, witness={"error": type(e).__name__})
        err.notes.append(str(e))
        Path(args.out).write_text(merge_reports([err]), encoding="utf-8")
        print(f"error: {e}", file=sys.stderr)
        return 2
    text = merge_reports(reports)
    Path(args.out).write_text(text, encoding="utf-8")
    failed = [r for r in reports if r.verdict == FAIL]
    for r in reports:
        print(f"{r.verdict:8s} {r.check}")
    for r in failed:
        print(f"  {r.check}: {'; '.join(r.notes)} witness={canonical(r.witness).strip()}", file=sys.stderr)
    return 1 if failed else 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
