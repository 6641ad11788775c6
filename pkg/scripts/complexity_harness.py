#!/usr/bin/env python3
"""Empirical parse-time curve: median CPU time against sentence length.

Parses worst-case ambiguous sentences (the catalan fixture) and sentences of
the tag-sequence fixture, then fits log(time) against log(length) by least
squares and reports the exponent.  The constants are machine-dependent, so
this is a report, not a test.
"""
import math
import statistics
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from punclr.glr import lattice_from_labels, parse_lattice
from punclr.grammar import compile_grammar, load_grammar
from punclr.lalr import build_lalr

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def artifacts(name):
    backbone, residues = compile_grammar(load_grammar(FIXTURES / name))
    return build_lalr(backbone), residues


def median_time(table, residues, labels, repeats=3):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        outcome = parse_lattice(lattice_from_labels(labels), table, residues)
        times.append(time.perf_counter() - t0)
        assert outcome.ok
    return statistics.median(times)


def fit_exponent(points):
    xs = [math.log(n) for n, t in points if t > 0]
    ys = [math.log(t) for n, t in points if t > 0]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    beta = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum(
        (x - mx) ** 2 for x in xs
    )
    return beta


def tagseq_sentence(n_pps):
    return ["AT", "NN1", "VVZ", "AT", "NN1"] + ["II", "AT", "NN1"] * n_pps


def main():
    print("worst-case ambiguous grammar (catalan fixture)")
    table, residues = artifacts("catalan.gr")
    points = []
    for n in range(4, 44, 4):
        t = median_time(table, residues, ["a"] * n)
        points.append((n, t))
        print("  n=%2d  median %.4fs" % (n, t))
    print("  fitted exponent: %.2f" % fit_exponent(points))

    print("tag-sequence fixture (PP attachment chains)")
    table, residues = artifacts("tagseq.gr")
    points = []
    for n_pps in range(1, 11):
        labels = tagseq_sentence(n_pps)
        t = median_time(table, residues, labels)
        points.append((len(labels), t))
        print("  n=%2d  median %.4fs" % (len(labels), t))
    print("  fitted exponent: %.2f" % fit_exponent(points))


if __name__ == "__main__":
    main()
