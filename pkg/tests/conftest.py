from __future__ import annotations

from pathlib import Path

import pytest

from etsx.crash import best_match_ets, parse_crash_report
from etsx.ets import extract_ets
from etsx.ir import load_program
from etsx.localize import locate

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "etsx" / "fixtures"
CORPUS = FIXTURES / "corpus"
EP = FIXTURES / "ep"


class Case:
    """A fixture directory run through extraction, matching and localization."""

    def __init__(self, path: Path):
        self.path = path
        self.program = load_program(path / "program.mir")
        self.report = parse_crash_report((path / "crash.txt").read_text(), self.program)
        self.store = extract_ets(self.program)
        self.match = best_match_ets(self.report, self.store)
        self.ets = self.match.ets
        self.ranking = locate(self.program, self.report, self.ets)


_cache: dict[Path, Case] = {}


def load_case(path: Path) -> Case:
    if path not in _cache:
        _cache[path] = Case(path)
    return _cache[path]


@pytest.fixture
def motivating() -> Case:
    return load_case(CORPUS / "motivating")


@pytest.fixture
def listings():
    return load_program(FIXTURES / "listings.mir")
