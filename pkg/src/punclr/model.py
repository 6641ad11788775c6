"""Action probabilities on LALR(1) transitions.

Counts come from replayable parse histories (the transition sequences of
treebank-consistent derivations).  Unseen transitions get probability mass by
Good-Turing smoothing with frequency-of-frequency statistics pooled over the
whole table: per-context statistics would be hopelessly sparse.  Where the
Turing estimate (r+1)N_{r+1}/N_r is undefined we fall back to a log-log
regression of N_r against r, and below that to one pseudo-traversal shared by
all unseen actions.  Within each (state, lookahead) context the action
probabilities form a simplex and every probability is strictly positive:
structural zeroes never occur, only unification failure can zero a
derivation.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .glr import (
    ForestLeaf,
    ParseForest,
    ROOT_KEY,
    derivation_signature,
    derivation_to_tree,
    derivation_transitions,
    enumerate_derivations,
)
from .lalr import Action, LalrTable


class ModelError(Exception):
    pass


@dataclass
class TransitionCounts:
    counts: dict  # (state, lookahead, Action) -> float
    table_hash: str
    total_histories: float = 0.0

    def total_mass(self) -> float:
        return sum(self.counts.values())


def train_counts(histories: Iterable, table_hash: str, weights=None) -> TransitionCounts:
    """Accumulate transition counts from parse histories.

    histories: iterable of transition sequences as recorded on derivations.
    weights: optional per-history weights; a treebank sentence that retains m
    consistent derivations contributes each of them at weight 1/m.
    """
    counts: dict = {}
    total = 0.0
    histories = list(histories)
    if weights is None:
        weights = [1.0] * len(histories)
    for history, w in zip(histories, weights):
        total += w
        for state, lookahead, action in history:
            key = (state, lookahead, action)
            counts[key] = counts.get(key, 0.0) + w
    return TransitionCounts(counts, table_hash, total)


def merge_counts(a: TransitionCounts, b: TransitionCounts) -> TransitionCounts:
    """Counts form a commutative monoid, so per-worker partials merge freely."""
    if a.table_hash != b.table_hash:
        raise ModelError("cannot merge counts for different tables")
    merged = dict(a.counts)
    for k, v in b.counts.items():
        merged[k] = merged.get(k, 0.0) + v
    return TransitionCounts(merged, a.table_hash, a.total_histories + b.total_histories)


# ---------------------------------------------------------------------------
# Good-Turing smoothing

def good_turing_adjusted_count(r: int, freq_of_freq: dict) -> float:
    """The Turing adjusted count r* = (r+1) N_{r+1} / N_r.

    Returns None when the estimate is undefined (N_r or N_{r+1} missing).
    """
    nr = freq_of_freq.get(r, 0)
    nr1 = freq_of_freq.get(r + 1, 0)
    if nr <= 0 or nr1 <= 0:
        return None
    return (r + 1) * nr1 / nr


def _loglog_slope(freq_of_freq: dict):
    """Least-squares slope of log N_r against log r (simple Good-Turing)."""
    points = [(math.log(r), math.log(n)) for r, n in freq_of_freq.items() if n > 0]
    if len(points) < 2:
        return None
    mx = sum(x for x, _ in points) / len(points)
    my = sum(y for _, y in points) / len(points)
    denom = sum((x - mx) ** 2 for x, _ in points)
    if denom == 0:
        return None
    return sum((x - mx) * (y - my) for x, y in points) / denom


def _adjusted_count_table(freq_of_freq: dict) -> dict:
    """Adjusted count for each integer frequency up to the maximum seen.

    Turing estimates where defined, regression fallback otherwise, and a
    final cumulative-max pass so a higher raw count never maps to a lower
    adjusted count.
    """
    if not freq_of_freq:
        return {}
    slope = _loglog_slope(freq_of_freq)
    max_r = max(freq_of_freq)
    table = {}
    for r in range(1, max_r + 1):
        adjusted = good_turing_adjusted_count(r, freq_of_freq)
        if adjusted is None:
            if slope is not None and slope < -1:
                adjusted = r * ((r + 1) / r) ** (slope + 1)
            else:
                adjusted = float(r)
        table[r] = adjusted
    running = 0.0
    for r in range(1, max_r + 1):
        running = max(running, table[r])
        table[r] = running
    return table


@dataclass
class ProbModel:
    probs: dict  # (state, lookahead, Action) -> probability
    unseen: dict  # (state, lookahead) -> probability of each unseen action there
    table_hash: str

    def prob(self, state, lookahead, action) -> float:
        p = self.probs.get((state, lookahead, action))
        if p is not None:
            return p
        p = self.unseen.get((state, lookahead))
        if p is not None:
            return p
        return self._floor()

    def _floor(self) -> float:
        if not hasattr(self, "_floor_cache"):
            candidates = list(self.unseen.values()) or list(self.probs.values())
            self._floor_cache = min(candidates)
        return self._floor_cache


def smooth_good_turing(counts: TransitionCounts, table: LalrTable) -> ProbModel:
    """Per-context probabilities over every action in the table.

    Within each (state, lookahead) context, seen actions carry their
    adjusted counts, unseen actions share the reserved unseen mass equally,
    and the whole context renormalizes to sum to one.
    """
    if counts.table_hash and counts.table_hash != table.table_hash():
        raise ModelError(
            "counts were trained against table %s, not %s"
            % (counts.table_hash, table.table_hash())
        )

    raw: dict = {}
    for key, c in counts.counts.items():
        if c > 0:
            raw[key] = c

    freq_of_freq: dict = {}
    for c in raw.values():
        r = max(1, round(c))
        freq_of_freq[r] = freq_of_freq.get(r, 0) + 1
    adjusted_table = _adjusted_count_table(freq_of_freq)

    def adjusted(c: float) -> float:
        if c >= 1:
            lo = int(c)
            hi = lo + 1
            a_lo = adjusted_table.get(lo, float(lo))
            a_hi = adjusted_table.get(hi)
            if a_hi is None:
                # beyond the table: keep the last discount ratio
                a_hi = a_lo * hi / lo if lo else float(hi)
            return a_lo + (c - lo) * (a_hi - a_lo)
        return c * adjusted_table.get(1, 1.0)

    n_unseen = 0
    for (state, label), actions in table.actions.items():
        for action in actions:
            if (state, label, action) not in raw:
                n_unseen += 1
    singletons = freq_of_freq.get(1, 0)
    if n_unseen:
        pseudo = (singletons / n_unseen) if singletons else (1.0 / n_unseen)
    else:
        pseudo = 0.0

    probs: dict = {}
    unseen: dict = {}
    for (state, label), actions in sorted(table.actions.items()):
        weights = []
        for action in sorted(actions):
            c = raw.get((state, label, action), 0.0)
            weights.append(adjusted(c) if c > 0 else pseudo)
        total = sum(weights)
        if total <= 0:
            weights = [1.0] * len(actions)
            total = float(len(actions))
        for action, w in zip(sorted(actions), weights):
            key = (state, label, action)
            p = w / total
            probs[key] = p
            if raw.get(key, 0.0) <= 0:
                unseen[(state, label)] = p
    return ProbModel(probs, unseen, table.table_hash())


# ---------------------------------------------------------------------------
# scoring and n-best extraction

def score_derivation(transitions, model: ProbModel) -> float:
    """Sum of log transition probabilities along one parse history."""
    return sum(math.log(model.prob(s, l, a)) for s, l, a in transitions)


@dataclass(frozen=True)
class RankedAnalysis:
    tree: object
    log_prob: float
    rank: int
    signature: tuple
    derivation: tuple


def rank_nbest(
    forest: ParseForest,
    model: ProbModel,
    n: int,
    include_tag_likelihoods: bool = False,
) -> list:
    """The n most probable analyses, exactly.

    Packing keys include state, residue, and pending lookahead, so the score
    of a subderivation is context-free within the forest and a lazy k-best
    over the bundle DAG is exact.  Candidates are re-scored along their
    canonical transition sequence and ties break on the lexicographic
    derivation signature.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if model.table_hash and forest.table_hash and model.table_hash != forest.table_hash:
        raise ModelError(
            "model trained against table %s but forest built with %s"
            % (model.table_hash, forest.table_hash)
        )

    def leaf_score(node) -> float:
        s, l, a = node.transition
        score = math.log(model.prob(s, l, a))
        if include_tag_likelihoods:
            score += math.log(node.likelihood)
        return score

    # lazy k-best lists per node: entries (score, signature, derivation)
    lists: dict = {}
    heaps: dict = {}
    pushed: dict = {}

    def ensure(key):
        if key in lists:
            return
        node = forest.nodes[key]
        if isinstance(node, ForestLeaf):
            deriv = (key, None, ())
            lists[key] = [(leaf_score(node), (("t", node.label),), deriv)]
            heaps[key] = []
            pushed[key] = set()
            return
        lists[key] = []
        heaps[key] = []
        pushed[key] = set()
        for bi, b in enumerate(node.bundles):
            _push(key, node, bi, (0,) * len(b.children))

    def _push(key, node, bi, ranks):
        if (bi, ranks) in pushed[key]:
            return
        pushed[key].add((bi, ranks))
        b = node.bundles[bi]
        s, l, a = b.transition
        score = math.log(model.prob(s, l, a))
        sig = [("p", b.production)]
        children = []
        for ck, r in zip(b.children, ranks):
            entry = _get(ck, r)
            if entry is None:
                return
            cs, csig, cd = entry
            score += cs
            sig.extend(csig)
            children.append(cd)
        deriv = (key, bi, tuple(children))
        heapq.heappush(heaps[key], (-score, tuple(sig), bi, ranks, deriv))

    def _get(key, rank):
        ensure(key)
        while len(lists[key]) <= rank and heaps[key]:
            negscore, sig, bi, ranks, deriv = heapq.heappop(heaps[key])
            lists[key].append((-negscore, sig, deriv))
            node = forest.nodes[key]
            for ci in range(len(ranks)):
                nxt = list(ranks)
                nxt[ci] += 1
                _push(key, node, bi, tuple(nxt))
        return lists[key][rank] if rank < len(lists[key]) else None

    want = max(n * 2 + 16, n)
    candidates = []
    for i in range(want):
        entry = _get(ROOT_KEY, i)
        if entry is None:
            break
        candidates.append(entry)

    rescored = []
    for _, _, deriv in candidates:
        transitions = derivation_transitions(forest, deriv)
        score = score_derivation(transitions, model)
        if include_tag_likelihoods:
            score += _leaf_likelihood_sum(forest, deriv)
        rescored.append((score, derivation_signature(forest, deriv), deriv))
    rescored.sort(key=lambda e: (-e[0], e[1]))

    out = []
    for rank, (score, sig, deriv) in enumerate(rescored[:n], 1):
        out.append(
            RankedAnalysis(derivation_to_tree(forest, deriv), score, rank, sig, deriv)
        )
    return out


def _leaf_likelihood_sum(forest, deriv) -> float:
    key, bi, children = deriv
    node = forest.nodes[key]
    if isinstance(node, ForestLeaf):
        return math.log(node.likelihood)
    return sum(_leaf_likelihood_sum(forest, c) for c in children)


def extract_histories(forest: ParseForest, limit: Optional[int] = None):
    """Transition sequences of every derivation in a (small) forest, plus
    the per-history weight 1/m."""
    derivs = enumerate_derivations(forest, limit)
    histories = [derivation_transitions(forest, d) for d in derivs]
    m = len(histories)
    weights = [1.0 / m] * m if m else []
    return histories, weights


# ---------------------------------------------------------------------------
# serialization

def save_counts(counts: TransitionCounts, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("punclr-counts v1\n")
        fh.write("table %s\n" % counts.table_hash)
        fh.write("histories %r\n" % counts.total_histories)
        for (state, label, action), c in sorted(
            counts.counts.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])
        ):
            fh.write(
                "count %d %s %s %d %r\n" % (state, _esc(label), action.kind, action.arg, c)
            )


def load_counts(path) -> TransitionCounts:
    counts: dict = {}
    table_hash = ""
    total = 0.0
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "punclr-counts v1":
            raise ModelError("not a punclr counts file: %r" % header)
        for line in fh:
            parts = line.split()
            if parts[0] == "table":
                table_hash = parts[1]
            elif parts[0] == "histories":
                total = float(parts[1])
            elif parts[0] == "count":
                key = (int(parts[1]), _unesc(parts[2]), Action(parts[3], int(parts[4])))
                counts[key] = float(parts[5])
    return TransitionCounts(counts, table_hash, total)


def save_model(model: ProbModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("punclr-model v1\n")
        fh.write("table %s\n" % model.table_hash)
        for (state, label), p in sorted(model.unseen.items()):
            fh.write("unseen %d %s %r\n" % (state, _esc(label), p))
        for (state, label, action), p in sorted(
            model.probs.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])
        ):
            fh.write(
                "prob %d %s %s %d %r\n" % (state, _esc(label), action.kind, action.arg, p)
            )


def load_model(path) -> ProbModel:
    probs: dict = {}
    unseen: dict = {}
    table_hash = ""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "punclr-model v1":
            raise ModelError("not a punclr model file: %r" % header)
        for line in fh:
            parts = line.split()
            if parts[0] == "table":
                table_hash = parts[1]
            elif parts[0] == "unseen":
                unseen[(int(parts[1]), _unesc(parts[2]))] = float(parts[3])
            elif parts[0] == "prob":
                key = (int(parts[1]), _unesc(parts[2]), Action(parts[3], int(parts[4])))
                probs[key] = float(parts[5])
    return ProbModel(probs, unseen, table_hash)


def _esc(label: str) -> str:
    return label.replace("%", "%25").replace(" ", "%20")


def _unesc(label: str) -> str:
    return label.replace("%20", " ").replace("%25", "%")
