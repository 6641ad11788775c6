"""Command-line pipeline: compile, parse, train, rank, eval, stats, ablate.

Reports are deterministic byte-for-byte given identical inputs and seeds;
timings are printed only on request since they never are.  Exit codes:
0 success, 1 usage error, 2 data or hash mismatch, 3 no analysis under
--strict.
"""
from __future__ import annotations

import argparse
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .evalmetrics import coverage_stats, extract_brackets, geig_report
from .glr import (
    SentenceLattice,
    constrained_parse,
    count_parses,
    derivation_to_tree,
    enumerate_derivations,
    export_forest,
    parse_lattice,
)
from .grammar import GrammarError, compile_grammar, load_grammar
from .lalr import build_lalr, dump_table, load_table
from .lattice import read_tagged_file, to_lattice
from .model import (
    ModelError,
    extract_histories,
    load_model,
    rank_nbest,
    save_counts,
    save_model,
    smooth_good_turing,
    train_counts,
)
from .trees import format_tree, internal_spans, read_treebank, tree_leaves


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_artifacts(grammar_path):
    grammar = load_grammar(grammar_path)
    backbone, residues = compile_grammar(grammar)
    table = build_lalr(backbone)
    return grammar, backbone, residues, table


def read_lattices(path, plain, certainty, ratio):
    out = []
    for tokens in read_tagged_file(path, plain=plain):
        out.append(to_lattice(tokens, certainty, ratio))
    return out


def lattice_from_leaves(leaves) -> SentenceLattice:
    from .glr import Token

    return SentenceLattice(
        tuple(Token(leaf, i, ((leaf, 1.0),)) for i, leaf in enumerate(leaves))
    )


# ---------------------------------------------------------------------------
# workers for sentence-level parallelism

_WORKER_STATE = {}


def _init_worker(grammar_path):
    _WORKER_STATE["artifacts"] = load_artifacts(grammar_path)


def _parse_one(job):
    idx, lattice, budget = job
    _, _, residues, table = _WORKER_STATE["artifacts"]
    outcome = parse_lattice(lattice, table, residues, budget=budget)
    count = count_parses(outcome.forest) if outcome.ok else None
    return idx, outcome.status, count, outcome.cpu_seconds


def _run_parses(args, lattices, artifacts):
    _, _, residues, table = artifacts
    jobs = [(i, lat, args.timeout) for i, lat in enumerate(lattices)]
    if getattr(args, "jobs", 1) and args.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_init_worker,
            initargs=(args.grammar,),
        ) as pool:
            results = list(pool.map(_parse_one, jobs))
    else:
        _WORKER_STATE["artifacts"] = artifacts
        results = [_parse_one(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    return results


# ---------------------------------------------------------------------------
# subcommands

def cmd_compile(args):
    grammar, backbone, residues, table = load_artifacts(args.grammar)
    if args.table_out:
        dump_table(table, args.table_out)
    rows = [
        ("grammar rules", len(grammar.rules)),
        ("backbone productions", len(backbone.productions)),
        ("lalr states", table.n_states),
        ("table actions", table.action_count),
        ("backbone hash", backbone.content_hash()),
        ("table hash", table.table_hash()),
    ]
    if args.format == "tsv":
        print("\t".join(str(k) for k, _ in rows))
        print("\t".join(str(v) for _, v in rows))
    else:
        for k, v in rows:
            print("%-22s %s" % (k, v))
    return 0


def _check_table_file(args, table):
    if getattr(args, "table", None):
        on_disk = load_table(args.table)
        if on_disk.table_hash() != table.table_hash():
            raise DataError(
                "table file %s does not match the grammar (hashes %s vs %s)"
                % (args.table, on_disk.table_hash(), table.table_hash())
            )


def cmd_parse(args):
    artifacts = load_artifacts(args.grammar)
    _check_table_file(args, artifacts[3])
    lattices = read_lattices(args.input, args.plain, args.certainty, args.ratio)
    results = _run_parses(args, lattices, artifacts)
    failures = 0
    if args.format == "tsv":
        print("sentence\tstatus\tparses")
    for idx, status, count, cpu in results:
        if status != "ok":
            failures += 1
        cell = str(count) if count is not None else "-"
        if args.format == "tsv":
            print("%d\t%s\t%s" % (idx, status, cell))
        else:
            line = "sentence %-4d %-8s %s parses" % (idx, status, cell)
            if args.timing:
                line += "  (%.3fs)" % cpu
            print(line)
    if args.dump_forest:
        _, _, residues, table = artifacts
        outdir = Path(args.dump_forest)
        outdir.mkdir(parents=True, exist_ok=True)
        for i, lat in enumerate(lattices):
            outcome = parse_lattice(lat, table, residues, budget=args.timeout)
            if outcome.ok:
                (outdir / ("sentence%03d.forest" % i)).write_text(
                    export_forest(outcome.forest), encoding="utf-8"
                )
    if args.strict and failures:
        return 3
    return 0


def _subsample(trees, spec, seed):
    if spec is None:
        return list(trees)
    frac = Fraction(spec)
    count = int(round(float(frac) * len(trees)))
    rng = random.Random(seed)
    if count >= len(trees):
        return list(trees)
    return rng.sample(list(trees), count)


def train_model_from_treebanks(artifacts, treebank_paths, weights, subsample=None,
                               seed=0, max_histories=5000):
    """Bracket-constrained training; returns (counts, model, report dict)."""
    grammar, backbone, residues, table = artifacts
    trees = []
    for path, weight in zip(treebank_paths, weights):
        for _, tree in read_treebank(path):
            trees.append((tree, weight))
    trees = _subsample(trees, subsample, seed)
    histories = []
    history_weights = []
    used = 0
    inconsistent = 0
    unparseable = 0
    capped = 0
    for tree, weight in trees:
        lattice = lattice_from_leaves(tree_leaves(tree))
        skeleton = [s for s in internal_spans(tree) if s[1] - s[0] >= 2]
        outcome = constrained_parse(lattice, table, residues, skeleton)
        if not outcome.ok:
            plain = parse_lattice(lattice, table, residues)
            if plain.ok:
                inconsistent += 1
            else:
                unparseable += 1
            continue
        hs, ws = extract_histories(outcome.forest)
        if len(hs) > max_histories:
            capped += 1
            continue
        used += 1
        histories.extend(hs)
        history_weights.extend(w * weight for w in ws)
    counts = train_counts(histories, table.table_hash(), history_weights)
    model = smooth_good_turing(counts, table)
    report = {
        "trees": len(trees),
        "used": used,
        "histories": len(histories),
        "skeleton_inconsistent": inconsistent,
        "unparseable": unparseable,
        "over_history_cap": capped,
    }
    return counts, model, report


def cmd_train(args):
    artifacts = load_artifacts(args.grammar)
    weights = args.weight or []
    weights = weights + [1.0] * (len(args.treebank) - len(weights))
    counts, model, report = train_model_from_treebanks(
        artifacts,
        args.treebank,
        weights,
        subsample=args.subsample,
        seed=args.seed,
        max_histories=args.max_histories,
    )
    if report["used"] == 0:
        raise DataError("no usable treebank sentences (of %d read)" % report["trees"])
    save_model(model, args.model_out)
    if args.counts_out:
        save_counts(counts, args.counts_out)
    frac_bad = (
        report["skeleton_inconsistent"] / report["trees"] if report["trees"] else 0.0
    )
    rows = [
        ("treebank trees", report["trees"]),
        ("sentences used", report["used"]),
        ("histories extracted", report["histories"]),
        ("skeleton-inconsistent", report["skeleton_inconsistent"]),
        ("unparseable", report["unparseable"]),
        ("over history cap", report["over_history_cap"]),
        ("fraction inconsistent", "%.3f" % frac_bad),
        ("table hash", model.table_hash),
    ]
    if args.format == "tsv":
        print("\t".join(str(k) for k, _ in rows))
        print("\t".join(str(v) for _, v in rows))
    else:
        for k, v in rows:
            print("%-22s %s" % (k, v))
    return 0


def cmd_rank(args):
    artifacts = load_artifacts(args.grammar)
    grammar, backbone, residues, table = artifacts
    _check_table_file(args, table)
    model = load_model(args.model)
    if model.table_hash != table.table_hash():
        raise DataError(
            "model %s was trained against a different table" % args.model
        )
    lattices = read_lattices(args.input, args.plain, args.certainty, args.ratio)
    failures = 0
    for i, lat in enumerate(lattices):
        outcome = parse_lattice(lat, table, residues, budget=args.timeout)
        if not outcome.ok:
            failures += 1
            if args.format == "tsv":
                print("%d\t*\t%s\t-" % (i, outcome.status))
            else:
                print("sentence %-4d %s" % (i, outcome.status))
            continue
        ranked = rank_nbest(
            outcome.forest, model, args.nbest,
            include_tag_likelihoods=args.tag_likelihoods,
        )
        words = lat.words()
        for analysis in ranked:
            rendered = format_tree(_with_words(analysis.tree, words))
            if args.format == "tsv":
                print("%d\t%d\t%r\t%s" % (i, analysis.rank, analysis.log_prob, rendered))
            else:
                print(
                    "sentence %-4d rank %d  logp %.6f  %s"
                    % (i, analysis.rank, analysis.log_prob, rendered)
                )
    if args.strict and failures:
        return 3
    return 0


def _with_words(tree, words):
    from .glr import Tree

    if tree.is_leaf():
        return Tree(tree.label, (), tree.start, tree.end, words[tree.start])
    return Tree(
        tree.label,
        tuple(_with_words(c, words) for c in tree.children),
        tree.start,
        tree.end,
        tree.word,
    )


def select_analysis(forest, model, rng=None):
    """Rank-1 analysis, or a random derivation when rng is given (the
    zero-training condition)."""
    if rng is None:
        return rank_nbest(forest, model, 1)[0].tree
    derivs = enumerate_derivations(forest)
    return derivation_to_tree(forest, rng.choice(derivs))


def evaluate_against_gold(artifacts, gold_trees, model=None, rng=None, timeout=None):
    """Parse each gold sentence, select one analysis, compare brackets.
    Returns (report, n_failed)."""
    grammar, backbone, residues, table = artifacts
    pairs = []
    failed = 0
    for tree in gold_trees:
        lattice = lattice_from_leaves(tree_leaves(tree))
        outcome = parse_lattice(lattice, table, residues, budget=timeout)
        if not outcome.ok:
            failed += 1
            continue
        chosen = select_analysis(outcome.forest, model, rng)
        pairs.append((extract_brackets(chosen), extract_brackets(tree)))
    if not pairs:
        raise DataError("no gold sentence could be parsed")
    return geig_report(pairs), failed


def cmd_eval(args):
    gold = [t for _, t in read_treebank(args.gold)]
    if args.parsed:
        parsed = [t for _, t in read_treebank(args.parsed)]
        if len(parsed) != len(gold):
            raise DataError(
                "parsed treebank has %d sentences but gold has %d"
                % (len(parsed), len(gold))
            )
        pairs = [
            (extract_brackets(p), extract_brackets(g)) for p, g in zip(parsed, gold)
        ]
        report = geig_report(pairs)
        failed = 0
    else:
        if not args.grammar or not args.model:
            raise UsageError("eval needs either --parsed or --grammar and --model")
        artifacts = load_artifacts(args.grammar)
        model = load_model(args.model)
        if model.table_hash != artifacts[3].table_hash():
            raise DataError("model does not match the grammar's table")
        report, failed = evaluate_against_gold(
            artifacts, gold, model, timeout=args.timeout
        )
    print(report.tsv() if args.format == "tsv" else report.format())
    if failed:
        print("unparsed sentences: %d" % failed)
    return 0


def cmd_stats(args):
    artifacts = load_artifacts(args.grammar)
    lattices = read_lattices(args.input, args.plain, args.certainty, args.ratio)
    results = _run_parses(args, lattices, artifacts)
    outcomes = [
        (status, len(lattices[idx]), count) for idx, status, count, _ in results
    ]
    stats = coverage_stats(outcomes)
    print(stats.tsv() if args.format == "tsv" else stats.format())
    return 0


def ablation_curve(artifacts, train_trees, gold_trees, seeds=5, base_seed=0,
                   sizes=None):
    """Accuracy against training-set size, halving down to zero.

    The zero-size condition replaces ranking by a seeded random choice among
    all analyses.  Returns rows of (size, mean recall, mean precision)."""
    if sizes is None:
        sizes = []
        size = len(train_trees)
        while size >= 1:
            sizes.append(size)
            size //= 2
        sizes.append(0)
    rows = []
    for size in sizes:
        recalls = []
        precisions = []
        for rep in range(seeds):
            seed = base_seed * 1000003 + size * 101 + rep
            rng = random.Random(seed)
            if size == 0:
                report, _ = evaluate_against_gold(
                    artifacts, gold_trees, model=None, rng=rng
                )
            else:
                sample = (
                    rng.sample(train_trees, size)
                    if size < len(train_trees)
                    else list(train_trees)
                )
                counts, model, _ = _train_plain(artifacts, sample)
                report, _ = evaluate_against_gold(artifacts, gold_trees, model)
            recalls.append(report.recall)
            precisions.append(report.precision)
        rows.append(
            (size, sum(recalls) / len(recalls), sum(precisions) / len(precisions))
        )
    return rows


def _train_plain(artifacts, trees):
    grammar, backbone, residues, table = artifacts
    histories = []
    weights = []
    for tree in trees:
        lattice = lattice_from_leaves(tree_leaves(tree))
        skeleton = [s for s in internal_spans(tree) if s[1] - s[0] >= 2]
        outcome = constrained_parse(lattice, table, residues, skeleton)
        if not outcome.ok:
            continue
        hs, ws = extract_histories(outcome.forest)
        histories.extend(hs)
        weights.extend(ws)
    counts = train_counts(histories, table.table_hash(), weights)
    return counts, smooth_good_turing(counts, table), None


def cmd_ablate(args):
    artifacts = load_artifacts(args.grammar)
    train_trees = [t for _, t in read_treebank(args.treebank)]
    gold_trees = [t for _, t in read_treebank(args.gold)]
    rows = ablation_curve(
        artifacts, train_trees, gold_trees, seeds=args.seeds, base_seed=args.seed
    )
    if args.format == "tsv":
        print("size\trecall\tprecision\tseeds\tseed")
        for size, recall, precision in rows:
            print("%d\t%r\t%r\t%d\t%d" % (size, recall, precision, args.seeds, args.seed))
    else:
        print("training-size ablation (seeds=%d, base seed=%d)" % (args.seeds, args.seed))
        print("%8s %10s %10s" % ("trees", "recall", "precision"))
        for size, recall, precision in rows:
            print("%8d %9.1f%% %9.1f%%" % (size, 100 * recall, 100 * precision))
    return 0


# ---------------------------------------------------------------------------

def build_arg_parser():
    top = _Parser(prog="punclr", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common_io(p):
        p.add_argument("--format", choices=("human", "tsv"), default="human")

    def common_parse(p):
        p.add_argument("--grammar", required=True)
        p.add_argument("--table", help="compiled table file to verify against")
        p.add_argument("--timeout", type=float, default=30.0,
                       help="per-sentence CPU budget in seconds")
        p.add_argument("--certainty", type=float, default=0.9)
        p.add_argument("--ratio", type=float, default=50.0)
        p.add_argument("--plain", action="store_true",
                       help="input is word_LABEL tokens, likelihood 1.0")

    p = sub.add_parser("compile", help="build and report the LALR table")
    p.add_argument("grammar")
    p.add_argument("-o", "--table-out")
    common_io(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("parse", help="parse tagged sentences, count analyses")
    common_parse(p)
    p.add_argument("input")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--timing", action="store_true")
    p.add_argument("--dump-forest", metavar="DIR")
    common_io(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("train", help="train transition probabilities")
    p.add_argument("--grammar", required=True)
    p.add_argument("--treebank", action="append", required=True)
    p.add_argument("--weight", action="append", type=float)
    p.add_argument("--model-out", required=True)
    p.add_argument("--counts-out")
    p.add_argument("--subsample", help="fraction of trees, e.g. 1/64")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-histories", type=int, default=5000)
    common_io(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="emit the n most probable analyses")
    common_parse(p)
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--nbest", type=int, default=1)
    p.add_argument("--tag-likelihoods", action="store_true",
                   help="fold tag likelihoods into analysis scores")
    p.add_argument("--strict", action="store_true")
    common_io(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="GEIG bracket evaluation against gold trees")
    p.add_argument("--grammar")
    p.add_argument("--model")
    p.add_argument("--gold", required=True)
    p.add_argument("--parsed", help="evaluate these trees instead of parsing")
    p.add_argument("--timeout", type=float, default=30.0)
    common_io(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="coverage and ambiguity distribution")
    common_parse(p)
    p.add_argument("input")
    p.add_argument("--jobs", type=int, default=1)
    common_io(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ablate", help="accuracy vs training-set size")
    p.add_argument("--grammar", required=True)
    p.add_argument("--treebank", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    common_io(p)
    p.set_defaults(func=cmd_ablate)

    return top


def main(argv=None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 1
    except (DataError, ModelError, GrammarError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
