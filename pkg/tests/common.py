"""Shared helpers for the test suite."""

from __future__ import annotations

from pathlib import Path

from lazecost.parser import parse_module

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
CORPUS_FILES = sorted(CORPUS.glob("*.lzc"))


def load(name: str):
    return parse_module((CORPUS / f"{name}.lzc").read_text())
