from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from ackfund.corpus import load_corpus
from ackfund.harmonize import AliasTable

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def alias_table() -> AliasTable:
    return AliasTable.from_tsv(FIXTURES / "aliases.tsv")


@pytest.fixture(scope="session")
def table2_records():
    return load_corpus(FIXTURES / "table2.jsonl")


@pytest.fixture(scope="session")
def table2_expected() -> dict[str, set[str]]:
    raw = json.loads((FIXTURES / "table2_expected.json").read_text(encoding="utf-8"))
    return {k: set(v) for k, v in raw.items()}
