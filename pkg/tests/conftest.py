from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import fixture_corpus
from storynet.embedstore import EmbeddingTable
from storynet.ingest import load_corpus


@pytest.fixture(scope="session")
def corpus_paths(tmp_path_factory) -> dict[str, Path]:
    out = tmp_path_factory.mktemp("mini_corpus")
    return fixture_corpus.write_fixture(out)


@pytest.fixture(scope="session")
def mini_corpus(corpus_paths):
    return load_corpus(corpus_paths["tuples"], corpus_paths["reviews"])


@pytest.fixture(scope="session")
def mini_table() -> EmbeddingTable:
    vectors = {p: np.array(v, dtype=float) for p, v in fixture_corpus.EMBEDDINGS.items()}
    return EmbeddingTable(dim=fixture_corpus.DIM, vectors=vectors)
