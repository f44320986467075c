#!/usr/bin/env python3
"""
epistemia: multi-agent epistemic logic with common knowledge.

Subcommands cover structure validation and CK-expansion, model checking,
bisimulation, Cayley coverings and unfoldings, acyclicity/richness/freeness
analysis, dual hypergraphs, the upgrading game, the corpus generator, the
acceptance suite and an interactive bisimulation game.
"""

import argparse
import logging
import sys

import numpy as np

from libs import config
from libs.acyclicity import acyclicity_level, check_2acyclic_char, find_coset_cycle
from libs.bisim import coarsest_bisimulation, is_covering, l_bisimilar
from libs.cayley import EDGE_SETS, build_covering, check_richness, richness_level, tree_unfold
from libs.corpus import CorpusSpec, gen_corpus
from libs.efgame import fo_ef_oracle, upgrade_experiment
from libs.errors import EpistemiaError, NotAcyclic
from libs.formula import format_formula, model_check, parse, satisfaction
from libs.freeness import check_mk_free, find_free_witness, is_m_free
from libs.hypergraph import dual, join_tree
from libs.kripke import ValidationReport, ck_expand, format_coalition, parse_coalition
from libs.repl import repl
from libs.structio import (
    dump_structure,
    load_structure,
    read_json,
    structure_from_dict,
    write_json,
)
from libs.suite import SuiteSpec, run_suite


def emit(obj, path=None):
    """Write JSON to path, or to stdout without one."""
    text = write_json(obj, path)
    if path is None:
        sys.stdout.write(text)
    else:
        logging.info(f"Wrote {path}")


# -------------------- Commands --------------------

def cmd_validate(args):
    data = read_json(args.structure)
    result, _ = structure_from_dict(data, strict=args.strict)
    if isinstance(result, ValidationReport):
        emit({"ok": False, "report": result.to_dict()}, args.out)
        return 1
    emit({"ok": True, "worlds": result.n_worlds, "agents": list(result.agents),
          "props": list(result.prop_names)}, args.out)
    return 0


def cmd_expand(args):
    ck = ck_expand(load_structure(args.structure, strict=args.strict))
    blocks = {format_coalition(alpha, ck.agents) or "{}": [int(b) for b in ck.blocks[alpha]]
              for alpha in ck.coalitions}
    emit({"worlds": ck.n_worlds, "agents": list(ck.agents), "blocks": blocks}, args.out)
    return 0


def cmd_mc(args):
    ck = ck_expand(load_structure(args.structure))
    f = parse(args.formula, ck.agents, ck.prop_names)
    out = {"formula": format_formula(f, ck.agents, ck.prop_names)}
    if args.world is not None:
        out["world"] = args.world
        out["holds"] = model_check(ck, args.world, f)
    else:
        out["worlds"] = [int(w) for w in np.flatnonzero(satisfaction(ck, f))]
    emit(out, args.out)
    return 0


def cmd_bisim(args):
    left, right = load_structure(args.left), load_structure(args.right)
    if args.ell is not None:
        same = l_bisimilar(left, args.w, right, args.v, args.ell, args.mode)
        emit({"ell": args.ell, "mode": args.mode, "w": args.w, "v": args.v, "bisimilar": same}, args.out)
        return 0
    emit(coarsest_bisimulation(left, right, args.mode).to_dict(), args.out)
    return 0


def cmd_cover(args):
    m = load_structure(args.structure)
    c = build_covering(m, args.world, args.edges, args.copies, cap=args.cap)
    if args.check and not is_covering(c.covering()):
        logging.error("Constructed structure is not a bisimilar covering")
        return 1
    text = dump_structure(c.base, args.out, covering=c.covering_dict())
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_unfold(args):
    m = load_structure(args.structure)
    c = tree_unfold(m, args.world, args.depth, args.edges, args.copies, cap=args.cap)
    text = dump_structure(c.base, args.out, covering=c.covering_dict())
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_analyze(args):
    ck = ck_expand(load_structure(args.structure))
    if args.what == "acyclicity":
        cap = args.cap if args.cap is not None else config.CYCLE_CAP
        cycle = find_coset_cycle(ck, cap) if cap >= 2 else None
        emit({
            "two_acyclic": check_2acyclic_char(ck),
            "cap": cap,
            "level": acyclicity_level(ck, cap),
            "cycle": cycle.to_list(ck.agents) if cycle else None,
        }, args.out)
    elif args.what == "richness":
        report = check_richness(ck, args.k)
        emit({"level": richness_level(ck), "check": report.to_dict()}, args.out)
    else:
        report = check_mk_free(ck, args.m, args.k, threads=args.threads)
        emit(report.to_dict(), args.out)
        return 0 if report.ok else 1
    return 0


def cmd_dual(args):
    ck = ck_expand(load_structure(args.structure))
    h = dual(ck)
    out = h.to_dict()
    try:
        out["join_tree"] = join_tree(h).to_dict()
    except NotAcyclic as e:
        out["join_tree"] = None
        out["remainder"] = e.remainder
    emit(out, args.out)
    return 0


def cmd_witness(args):
    ck = ck_expand(load_structure(args.structure))
    zs = [int(z) for z in args.zs.split(",") if z.strip()]
    gamma = parse_coalition(args.gamma, ck.agents)
    steps = []
    v = find_free_witness(ck, args.v, zs, args.z0, gamma, args.m, transcript=steps)
    emit({"v": args.v, "zs": zs, "z0": args.z0, "gamma": args.gamma, "m": args.m, "witness": int(v),
          "free": bool(is_m_free(ck, zs, args.z0, v, args.m)), "push_steps": [s.to_dict() for s in steps]}, args.out)
    return 0


def cmd_upgrade(args):
    left, right = load_structure(args.left), load_structure(args.right)
    report = upgrade_experiment(left, args.w, right, args.v, args.q,
                                acyclicity=args.acyclicity, richness=args.richness,
                                replay=not args.no_replay, samples=args.samples, seed=args.seed)
    emit(report.to_dict(), args.report)
    return 0 if report.ok else 1


def cmd_ef_oracle(args):
    left, right = load_structure(args.left), load_structure(args.right)
    strategy = {}
    wins = fo_ef_oracle(left, args.w, right, args.v, args.q, strategy)
    emit({"q": args.q, "w": args.w, "v": args.v, "duplicator_wins": wins,
          "refutation": strategy or None}, args.out)
    return 0


def cmd_gen(args):
    spec = CorpusSpec.load(args.spec)
    paths = gen_corpus(spec, args.out)
    logging.info(f"Generated {len(paths)} structures")
    return 0


def cmd_suite(args):
    if args.spec:
        spec = SuiteSpec.load(args.spec)
    else:
        spec = SuiteSpec.from_dict({"profile": args.profile})
    return run_suite(spec, args.out, threads=args.threads, junit=not args.no_junit)


def cmd_repl(args):
    left, right = load_structure(args.left), load_structure(args.right)
    repl(left, args.w, right, args.v, args.rounds, transcript_path=args.transcript)
    return 0


# -------------------- CLI --------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="epistemia", description="Epistemic logic with common knowledge")
    parser.add_argument("--log-file", default="epistemia_log.log", help="Log file path")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="Only warnings and errors on the console")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Check that every agent relation is an equivalence")
    p.add_argument('--structure', required=True, help="Structure JSON file")
    p.add_argument('--strict', action="store_true", help="Require explicit reflexive loops")
    p.add_argument('--out', help="Output JSON file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("expand", help="Partitions of every coalition")
    p.add_argument('--structure', required=True, help="Structure JSON file")
    p.add_argument('--strict', action="store_true", help="Require explicit reflexive loops")
    p.add_argument('--out', help="Output JSON file")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("mc", help="Model check a formula")
    p.add_argument('--structure', required=True, help="Structure JSON file")
    p.add_argument('--formula', required=True, help="Formula text")
    p.add_argument('--world', type=int, help="World to check; all worlds when omitted")
    p.add_argument('--out', help="Output JSON file")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("bisim", help="Coarsest or bounded bisimulation between two structures")
    p.add_argument('--left', required=True, help="Left structure JSON file")
    p.add_argument('--right', required=True, help="Right structure JSON file")
    p.add_argument('--mode', default="ck", choices=["ck", "s5"])
    p.add_argument('--ell', type=int, help="Rounds of the bounded game")
    p.add_argument('--w', type=int, default=0, help="Left world")
    p.add_argument('--v', type=int, default=0, help="Right world")
    p.add_argument('--out', help="Output JSON file")
    p.set_defaults(func=cmd_bisim)

    for name, func in (("cover", cmd_cover), ("unfold", cmd_unfold)):
        p = sub.add_parser(name, help="Cayley covering" if name == "cover" else "Truncated free-group unfolding")
        p.add_argument('--structure', required=True, help="Connected structure JSON file")
        p.add_argument('--world', type=int, default=0, help="Base world w0")
        p.add_argument('--edges', default="spanning", choices=list(EDGE_SETS))
        p.add_argument('--copies', type=int, default=0, help="Generator copies for richness")
        p.add_argument('--cap', type=int, help="Element cap")
        p.add_argument('--out', help="Output JSON file")
        if name == "cover":
            p.add_argument('--check', action="store_true", help="Verify the covering before writing")
        else:
            p.add_argument('--depth', type=int, default=2, help="Word length bound")
        p.set_defaults(func=func)

    p = sub.add_parser("analyze", help="Acyclicity, richness or freeness of a structure")
    p.add_argument('what', choices=["acyclicity", "richness", "freeness"])
    p.add_argument('--structure', required=True, help="Structure JSON file")
    p.add_argument('--cap', type=int, help="Longest coset cycle searched")
    p.add_argument('--k', type=int, default=2, help="Richness or pointed-set size")
    p.add_argument('--m', type=int, default=2, help="Freeness distance")
    p.add_argument('--threads', type=int, help="Worker cap")
    p.add_argument('--out', help="Output JSON file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dual", help="Dual hypergraph and its join tree")
    p.add_argument('--structure', required=True, help="Structure JSON file")
    p.add_argument('--out', help="Output JSON file")
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("witness", help="Free witness search")
    p.add_argument('--structure', required=True, help="Structure JSON file")
    p.add_argument('--v', type=int, required=True, help="World to replace")
    p.add_argument('--zs', required=True, help="Comma separated pointed worlds")
    p.add_argument('--z0', type=int, required=True, help="Anchor world, one of --zs")
    p.add_argument('--gamma', default="", help="Coalition, e.g. a,b")
    p.add_argument('--m', type=int, default=2, help="Freeness distance")
    p.add_argument('--out', help="Output JSON file")
    p.set_defaults(func=cmd_witness)

    for name, func in (("upgrade", cmd_upgrade), ("ef-oracle", cmd_ef_oracle)):
        p = sub.add_parser(name, help="Upgrading game experiment" if name == "upgrade" else "First-order game oracle")
        p.add_argument('--left', required=True, help="Left structure JSON file")
        p.add_argument('--right', required=True, help="Right structure JSON file")
        p.add_argument('--q', type=int, required=True, help="Number of rounds")
        p.add_argument('--w', type=int, default=0, help="Left world")
        p.add_argument('--v', type=int, default=0, help="Right world")
        if name == "upgrade":
            p.add_argument('--report', help="Report JSON file")
            p.add_argument('--acyclicity', type=int, help="Acyclicity gate")
            p.add_argument('--richness', type=int, help="Richness gate")
            p.add_argument('--no-replay', action="store_true", help="Skip the Spoiler replay")
            p.add_argument('--samples', type=int, help="Sampled lines for three rounds")
            p.add_argument('--seed', type=int, help="Seed for sampling")
        else:
            p.add_argument('--out', help="Output JSON file")
        p.set_defaults(func=func)

    p = sub.add_parser("gen", help="Generate a structure corpus")
    p.add_argument('--spec', required=True, help="Corpus spec JSON file")
    p.add_argument('--out', required=True, help="Output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("suite", help="Run the acceptance suite")
    p.add_argument('--spec', help="Suite spec JSON file; default spec when omitted")
    p.add_argument('--profile', default="full", choices=["full", "small"])
    p.add_argument('--out', required=True, help="Output directory")
    p.add_argument('--threads', type=int, help="Worker cap")
    p.add_argument('--no-junit', action="store_true", help="Skip junit.xml")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("repl", help="Play Spoiler against the engine")
    p.add_argument('--left', required=True, help="Left structure JSON file")
    p.add_argument('--right', required=True, help="Right structure JSON file")
    p.add_argument('--w', type=int, default=0, help="Left world")
    p.add_argument('--v', type=int, default=0, help="Right world")
    p.add_argument('--rounds', type=int, default=2, help="Rounds to play")
    p.add_argument('--transcript', default="transcript.json", help="Transcript JSON file")
    p.set_defaults(func=cmd_repl)
    return parser


def setup_logging(args):
    stream = logging.StreamHandler()
    if args.quiet:
        stream.setLevel(logging.WARNING)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format='%(asctime)s [%(levelname)s] %(message)s',
        handlers=[
            logging.FileHandler(args.log_file, encoding="utf-8"),
            stream,
        ],
        force=True,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args)
    try:
        return args.func(args)
    except EpistemiaError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
