"""Generalized LR parsing of tag lattices into packed parse forests.

The parser runs a graph-structured stack over the (possibly conflicting)
LALR(1) table.  Reduce-time unification of rule residues prunes derivations;
pruned derivations never enter the forest.  Forest nodes are keyed by
(symbol, span, stack state beneath, residue signature, pending lookahead), a
key fine enough that every complete derivation's probability decomposes
exactly over the (state, lookahead, action) transitions recorded on its
bundles, at the cost of somewhat less packing.

Multiple label hypotheses per token are handled by running the reduce
closure once per pending label: reductions triggered under one hypothesis
must not feed stack branches that continue with a different one.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .grammar import (
    END_MARKER,
    Bindings,
    rename_features,
    residue_signature,
    resolve_features,
    unify,
)
from .lalr import ACCEPT, REDUCE, SHIFT, Action, LalrTable, lookup_actions


@dataclass(frozen=True)
class Token:
    word: str
    position: int
    labels: tuple  # ((label, likelihood), ...) non-increasing by likelihood


@dataclass(frozen=True)
class SentenceLattice:
    tokens: tuple

    def __post_init__(self):
        for i, tok in enumerate(self.tokens):
            if tok.position != i:
                raise ValueError("token positions must be consecutive from 0")
            if not tok.labels:
                raise ValueError("token %r has no label hypotheses" % tok.word)
            for label, lik in tok.labels:
                if not 0 < lik <= 1:
                    raise ValueError(
                        "likelihood %r for %s|%s outside (0, 1]" % (lik, tok.word, label)
                    )

    def __len__(self):
        return len(self.tokens)

    def words(self):
        return [t.word for t in self.tokens]


def lattice_from_labels(labels) -> SentenceLattice:
    """Single-hypothesis lattice from a plain label sequence."""
    return SentenceLattice(
        tuple(Token(lab, i, ((lab, 1.0),)) for i, lab in enumerate(labels))
    )


@dataclass(frozen=True)
class Bundle:
    production: int  # -1 for the virtual root (accept) bundle
    children: tuple  # forest node keys, left to right
    transition: tuple  # (state, lookahead, Action)


@dataclass
class ForestLeaf:
    key: tuple
    label: str
    word: str
    position: int
    likelihood: float
    transition: tuple

    @property
    def start(self):
        return self.position

    @property
    def end(self):
        return self.position + 1


@dataclass
class ForestNode:
    key: tuple
    symbol: str
    start: int
    end: int
    residue: tuple
    bundles: list = field(default_factory=list)


ROOT_KEY = ("root",)


@dataclass
class ParseForest:
    nodes: dict
    n_tokens: int
    start_symbol: str
    table_hash: str = ""

    @property
    def root(self) -> ForestNode:
        return self.nodes[ROOT_KEY]


@dataclass
class ParseOutcome:
    status: str  # "ok" | "fail" | "timeout"
    forest: Optional[ParseForest] = None
    reason: str = ""
    cpu_seconds: float = 0.0
    n_tokens: int = 0

    @property
    def ok(self):
        return self.status == "ok"


class _GssNode:
    __slots__ = ("state", "position", "serial", "edges", "_edge_keys")

    def __init__(self, state, position, serial):
        self.state = state
        self.position = position
        self.serial = serial  # deterministic creation index, part of forest keys
        self.edges = []  # (target _GssNode, forest key)
        self._edge_keys = set()

    def add_edge(self, target, forest_key) -> bool:
        key = (id(target), forest_key)
        if key in self._edge_keys:
            return False
        self._edge_keys.add(key)
        self.edges.append((target, forest_key))
        return True


def _crosses(start, end, skeleton):
    for a, b in skeleton:
        if start < a < end < b or a < start < b < end:
            return True
    return False


def parse_lattice(
    lattice: SentenceLattice,
    table: LalrTable,
    residues: dict,
    budget: Optional[float] = None,
    skeleton=None,
) -> ParseOutcome:
    """Parse a sentence lattice into a packed forest of root-spanning analyses.

    skeleton, when given, is a collection of (start, end) spans; reductions
    whose span would cross one are pruned, which implements bracket-
    constrained parsing.

    Returns fail(no-analysis) when no branch reaches accept and timeout when
    the CPU budget runs out (only if one was set).
    """
    t0 = time.process_time()
    n = len(lattice)
    skeleton = tuple(skeleton) if skeleton else ()
    forest_nodes: dict = {}
    bundle_keys: set = set()
    root_bundles: list = []
    start_symbol = None
    for p in table.productions:
        if p.rule_id == "$aug":
            start_symbol = p.rhs[0]
    serials = iter(range(1 << 60))
    initial = _GssNode(table.start_state, 0, next(serials))
    frontier = {table.start_state: initial}

    def out_of_budget():
        return budget is not None and time.process_time() - t0 > budget

    def fail(reason):
        return ParseOutcome("fail", None, reason, time.process_time() - t0, n)

    for j in range(n + 1):
        if out_of_budget():
            return ParseOutcome("timeout", None, "budget exhausted", time.process_time() - t0, n)
        if j < n:
            label_items = lattice.tokens[j].labels
            word = lattice.tokens[j].word
        else:
            label_items = ((END_MARKER, 1.0),)
            word = ""
        next_frontier: dict = {}
        for label, likelihood in label_items:
            local: dict = {}
            tasks = deque()
            seen_tasks: set = set()

            def enqueue(node, edge):
                """Queue reduce work for node, restricted to paths through
                edge when edge is not None."""
                for action in lookup_actions(table, node.state, label):
                    if action.kind != REDUCE:
                        continue
                    arity = len(table.productions[action.arg].rhs)
                    if arity == 0 and edge is None:
                        key = (id(node), action, None)
                    elif arity > 0 and edge is not None:
                        key = (id(node), action, id(edge[0]), edge[1])
                    else:
                        continue
                    if key not in seen_tasks:
                        seen_tasks.add(key)
                        tasks.append((node, action, edge))

            for node in frontier.values():
                enqueue(node, None)
                for edge in node.edges:
                    enqueue(node, edge)

            while tasks:
                if out_of_budget():
                    return ParseOutcome(
                        "timeout", None, "budget exhausted", time.process_time() - t0, n
                    )
                node, action, first_edge = tasks.popleft()
                prod = table.productions[action.arg]
                arity = len(prod.rhs)
                for path_edges, bottom in _pop_paths(node, arity, first_edge):
                    span_start = bottom.position
                    if skeleton and _crosses(span_start, j, skeleton):
                        continue
                    goto = table.gotos.get((bottom.state, prod.lhs))
                    if goto is None:
                        continue
                    children = tuple(fk for _, fk in reversed(path_edges))
                    spec = residues[prod.index]
                    bindings = Bindings()
                    mapping: dict = {}
                    ok = True
                    for k, child_key in enumerate(children):
                        child = forest_nodes[child_key]
                        child_res = child.residue if isinstance(child, ForestNode) else ()
                        spec_feats = rename_features(spec.daughters[k].features, mapping)
                        if unify(spec_feats, rename_features(child_res), bindings) is None:
                            ok = False
                            break
                    if not ok:
                        continue
                    mother = resolve_features(
                        rename_features(spec.mother.features, mapping), bindings
                    )
                    sig = residue_signature(mother)
                    # keyed by the GSS node beneath (serial), not merely its
                    # state: same-state nodes from different label closures
                    # have different continuations and must not be conflated
                    fkey = ("n", prod.lhs, span_start, j, bottom.serial,
                            bottom.state, sig, label)
                    fnode = forest_nodes.get(fkey)
                    if fnode is None:
                        fnode = ForestNode(fkey, prod.lhs, span_start, j, mother)
                        forest_nodes[fkey] = fnode
                    bkey = (fkey, prod.index, children)
                    if bkey not in bundle_keys:
                        bundle_keys.add(bkey)
                        fnode.bundles.append(
                            Bundle(prod.index, children, (node.state, label, action))
                        )
                    target = local.get(goto)
                    if target is None:
                        target = _GssNode(goto, j, next(serials))
                        local[goto] = target
                        target.add_edge(bottom, fkey)
                        enqueue(target, None)
                        enqueue(target, target.edges[0])
                    elif target.add_edge(bottom, fkey):
                        enqueue(target, target.edges[-1])

            if j < n:
                for node in list(frontier.values()) + list(local.values()):
                    for action in lookup_actions(table, node.state, label):
                        if action.kind != SHIFT:
                            continue
                        leaf_key = ("t", j, label, node.state)
                        if leaf_key not in forest_nodes:
                            forest_nodes[leaf_key] = ForestLeaf(
                                leaf_key, label, word, j, likelihood,
                                (node.state, label, action),
                            )
                        target = next_frontier.get(action.arg)
                        if target is None:
                            target = _GssNode(action.arg, j + 1, next(serials))
                            next_frontier[action.arg] = target
                        target.add_edge(node, leaf_key)
            else:
                for node in list(frontier.values()) + list(local.values()):
                    for action in lookup_actions(table, node.state, END_MARKER):
                        if action.kind != ACCEPT:
                            continue
                        for target, fkey in node.edges:
                            if target is initial and fkey[1] == start_symbol:
                                bkey = (ROOT_KEY, -1, (fkey,))
                                if bkey not in bundle_keys:
                                    bundle_keys.add(bkey)
                                    root_bundles.append(
                                        Bundle(-1, (fkey,), (node.state, END_MARKER, action))
                                    )
        if j < n and not next_frontier:
            return fail("no shift possible at token %d" % j)
        if j < n:
            frontier = next_frontier

    if not root_bundles:
        return fail("no analysis spans the sentence")

    root = ForestNode(ROOT_KEY, "$root", 0, n, (), root_bundles)
    forest_nodes[ROOT_KEY] = root
    reachable = _reachable_nodes(forest_nodes)
    forest = ParseForest(
        {k: v for k, v in forest_nodes.items() if k in reachable},
        n,
        start_symbol,
        table.table_hash(),
    )
    return ParseOutcome("ok", forest, "", time.process_time() - t0, n)


def _pop_paths(node, arity, first_edge):
    """Paths of `arity` edges downward from node; when first_edge is given,
    only paths whose first step is that edge (new-edge retriggering)."""
    if arity == 0:
        return [((), node)]
    out = []

    def rec(current, depth, acc):
        if depth == arity:
            out.append((tuple(acc), current))
            return
        for edge in current.edges:
            acc.append(edge)
            rec(edge[0], depth + 1, acc)
            acc.pop()

    if first_edge is not None:
        rec(first_edge[0], 1, [first_edge])
    else:
        rec(node, 0, [])
    return out


def _reachable_nodes(forest_nodes):
    seen = {ROOT_KEY}
    work = [ROOT_KEY]
    while work:
        key = work.pop()
        node = forest_nodes[key]
        if isinstance(node, ForestNode):
            for b in node.bundles:
                for ck in b.children:
                    if ck not in seen:
                        seen.add(ck)
                        work.append(ck)
    return seen


def constrained_parse(
    lattice: SentenceLattice,
    table: LalrTable,
    residues: dict,
    skeleton,
    budget: Optional[float] = None,
) -> ParseOutcome:
    """parse_lattice restricted to derivations consistent with unlabelled
    bracket spans: no parser constituent may cross a skeleton bracket."""
    return parse_lattice(lattice, table, residues, budget=budget, skeleton=skeleton)


# ---------------------------------------------------------------------------
# forest consumers

def count_parses(forest: ParseForest) -> int:
    """Exact derivation count by sum-product over bundles (no unpacking)."""
    memo: dict = {}

    def count(key) -> int:
        if key in memo:
            return memo[key]
        node = forest.nodes[key]
        if isinstance(node, ForestLeaf):
            memo[key] = 1
            return 1
        total = 0
        for b in node.bundles:
            prod = 1
            for ck in b.children:
                prod *= count(ck)
            total += prod
        memo[key] = total
        return total

    return count(ROOT_KEY)


def enumerate_derivations(forest: ParseForest, limit: Optional[int] = None):
    """All derivations as nested (key, bundle index, children) tuples.

    Exponential in general; meant for small sentences and tests.
    """
    memo: dict = {}

    def expand(key):
        if key in memo:
            return memo[key]
        node = forest.nodes[key]
        if isinstance(node, ForestLeaf):
            result = [(key, None, ())]
        else:
            result = []
            for bi, b in enumerate(node.bundles):
                child_lists = [expand(ck) for ck in b.children]
                for combo in _product(child_lists):
                    result.append((key, bi, combo))
        memo[key] = result
        return result

    out = expand(ROOT_KEY)
    if limit is not None:
        return out[:limit]
    return out


def _product(lists):
    if not lists:
        return [()]
    out = [()]
    for lst in lists:
        out = [acc + (item,) for acc in out for item in lst]
    return out


def derivation_transitions(forest: ParseForest, deriv):
    """The LR run of one derivation: post-order over the tree gives the
    exact (state, lookahead, action) sequence the parser traversed."""
    out = []

    def walk(d):
        key, bi, children = d
        node = forest.nodes[key]
        for c in children:
            walk(c)
        if isinstance(node, ForestLeaf):
            out.append(node.transition)
        else:
            out.append(node.bundles[bi].transition)

    walk(deriv)
    return out


def derivation_signature(forest: ParseForest, deriv):
    """Preorder sequence of production ids and leaf labels; unique per
    derivation and totally ordered, used for deterministic tie-breaking."""
    out = []

    def walk(d):
        key, bi, children = d
        node = forest.nodes[key]
        if isinstance(node, ForestLeaf):
            out.append(("t", node.label))
        else:
            out.append(("p", node.bundles[bi].production))
            for c in children:
                walk(c)

    walk(deriv)
    return tuple(out)


@dataclass(frozen=True)
class Tree:
    label: str
    children: tuple
    start: int
    end: int
    word: str = ""

    def is_leaf(self):
        return not self.children

    def pretty(self) -> str:
        if self.is_leaf():
            return self.word or self.label
        return "(%s %s)" % (self.label, " ".join(c.pretty() for c in self.children))


def is_iteration_symbol(symbol: str) -> bool:
    """Auxiliary symbols minted by Kleene expansion carry a '*', which user
    symbols cannot."""
    return "*" in symbol


def derivation_to_tree(forest: ParseForest, deriv) -> Tree:
    """Labelled tree for one derivation; Kleene iteration auxiliaries are
    spliced away so a starred daughter shows up as a flat sibling list."""
    key, bi, children = deriv
    node = forest.nodes[key]
    if isinstance(node, ForestLeaf):
        return Tree(node.label, (), node.start, node.end, node.word)
    kids = []
    for c in children:
        sub = derivation_to_tree(forest, c)
        if is_iteration_symbol(sub.label):
            kids.extend(sub.children)
        else:
            kids.append(sub)
    if key == ROOT_KEY:
        return kids[0]
    return Tree(node.symbol, tuple(kids), node.start, node.end)


def export_forest(forest: ParseForest) -> str:
    """Textual shared-forest dump, one node per line."""
    lines = []
    for key in sorted(forest.nodes, key=repr):
        node = forest.nodes[key]
        if isinstance(node, ForestLeaf):
            lines.append(
                "leaf %r label=%s word=%s span=%d:%d p=%g trans=%s"
                % (key, node.label, node.word, node.start, node.end,
                   node.likelihood, _trans_str(node.transition))
            )
        else:
            parts = []
            for b in node.bundles:
                parts.append(
                    "[p%d %s trans=%s]"
                    % (b.production, " ".join(repr(c) for c in b.children),
                       _trans_str(b.transition))
                )
            lines.append(
                "node %r sym=%s span=%d:%d residue=%s bundles=%s"
                % (key, node.symbol, node.start, node.end,
                   node.residue, " ".join(parts))
            )
    return "\n".join(lines) + "\n"


def _trans_str(transition):
    state, label, action = transition
    return "(%d,%s,%s)" % (state, label, action)
