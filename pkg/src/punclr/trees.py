"""Parenthesis-nested treebank reading.

One tree per line, labels optional: ``(S (NP the dog) (VP barks))`` or
``((the dog) (barks))``.  A skeleton file is the same format with labels
omitted; only the bracket shape matters there.
"""
from __future__ import annotations

from .glr import Tree


class TreebankError(ValueError):
    pass


def parse_tree_line(line: str, labelled: bool = True) -> Tree:
    """Parse one parenthesis tree.

    In labelled mode an atom directly after '(' is the node label (a '('
    there means the label was omitted); in unlabelled (skeleton) mode every
    atom is a leaf.
    """
    tokens = line.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0
    leaf_index = 0

    def parse():
        nonlocal pos, leaf_index
        if pos >= len(tokens):
            raise TreebankError("unexpected end of tree")
        tok = tokens[pos]
        if tok == ")":
            raise TreebankError("unexpected ')'")
        if tok != "(":
            pos += 1
            leaf_index += 1
            return Tree(tok, (), leaf_index - 1, leaf_index, tok)
        pos += 1  # consume '('
        label = ""
        if labelled and pos < len(tokens) and tokens[pos] not in ("(", ")"):
            label = tokens[pos]
            pos += 1
        children = []
        while pos < len(tokens) and tokens[pos] != ")":
            children.append(parse())
        if pos >= len(tokens):
            raise TreebankError("missing ')'")
        pos += 1  # consume ')'
        if not children:
            raise TreebankError("empty constituent")
        return Tree(label, tuple(children), children[0].start, children[-1].end)

    tree = parse()
    if pos != len(tokens):
        raise TreebankError("trailing material after tree: %r" % tokens[pos:])
    return tree


def read_treebank(path, labelled: bool = True):
    """Yield (lineno, Tree) per non-empty line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                yield lineno, parse_tree_line(line, labelled)
            except TreebankError as exc:
                raise TreebankError("line %d: %s" % (lineno, exc)) from None


def read_skeletons(path):
    """Skeleton file: unlabelled bracketings, one sentence per line."""
    return read_treebank(path, labelled=False)


def tree_leaves(tree: Tree):
    if tree.is_leaf():
        return [tree.word or tree.label]
    out = []
    for c in tree.children:
        out.extend(tree_leaves(c))
    return out


def tree_length(tree: Tree) -> int:
    return tree.end - tree.start


def internal_spans(tree: Tree):
    """Spans of every internal node, root included, as a list (multiset)."""
    out = []

    def walk(t):
        if t.is_leaf():
            return
        out.append((t.start, t.end))
        for c in t.children:
            walk(c)

    walk(tree)
    return out


def format_tree(tree: Tree) -> str:
    if tree.is_leaf():
        return tree.word or tree.label
    inner = " ".join(format_tree(c) for c in tree.children)
    return "(%s %s)" % (tree.label, inner) if tree.label else "(%s)" % inner
