import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

FIXTURES = ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


def compile_fixture(name):
    from punclr.grammar import compile_grammar, load_grammar
    from punclr.lalr import build_lalr

    grammar = load_grammar(FIXTURES / name)
    backbone, residues = compile_grammar(grammar)
    return grammar, backbone, residues, build_lalr(backbone)
