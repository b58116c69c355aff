from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kgmotif.kg import KnowledgeGraph, load_kg, random_kg

DATA = Path(__file__).parent / "data"
TWIN = DATA / "twin.tsv"
BANK = DATA / "bank.tsv"

settings.register_profile("kgmotif", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kgmotif")


def fuzz_graphs(seed: int, count: int, **kwargs) -> list[KnowledgeGraph]:
    """The random-KG fuzzer with a fixed Philox stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    return [random_kg(rng, **kwargs) for _ in range(count)]


def kg(*triples: tuple[str, str, str], relations=()) -> KnowledgeGraph:
    return KnowledgeGraph.from_triples(list(triples), relations=list(relations))


@pytest.fixture
def twin() -> KnowledgeGraph:
    return load_kg(TWIN)


@pytest.fixture
def twin_links(twin):
    return twin.link("r3", "u", "v1"), twin.link("r3", "u", "v2")


@pytest.fixture
def bank() -> KnowledgeGraph:
    return load_kg(BANK)
