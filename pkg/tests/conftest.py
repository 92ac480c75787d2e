import random

import pytest

from lakemend.ingest import register_lake
from lakemend.model import Tuple
from lakemend.semantic import CachingEmbedder, HashingEmbedder

# Query table in the style of the hospital walkthrough: four people, two of
# them missing a blood type, with the lake carrying the value under a
# renamed attribute.
HEALTH_CSV = (
    b"Name,City,BT\n"
    b"Zidane,Madrid,O\n"
    b"Ava,Doha,NULL\n"
    b"Lia,Paris,A\n"
    b"Noor,Tunis,\n"
)

HOSPITAL_CSV = (
    b"Name,City,Blood_Type\n"
    b"Ava,Doha,B\n"
    b"Omar,Cairo,AB\n"
    b"Noor,Tunis,O\n"
)

CLINIC_CSV = (
    b"Name,City,Ward\n"
    b"Maya,Oslo,West\n"
    b"Ravi,Pune,East\n"
)


def make_tuple(table_id, row_id, **attrs):
    return Tuple(table_id, row_id, tuple(attrs.items()))


@pytest.fixture()
def embedder():
    return CachingEmbedder(HashingEmbedder())


@pytest.fixture()
def fixture_lake():
    return register_lake([("hospital.csv", HOSPITAL_CSV), ("clinic.csv", CLINIC_CSV)])


@pytest.fixture()
def rng():
    return random.Random(20260822)


def random_word(rng, length=8):
    return "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(length))


def random_lake_files(rng, tables=2, rows=5, columns=("Alpha", "Beta", "Gamma")):
    """Seeded CSV bytes with pairwise-distinct random values."""
    files = []
    for t in range(tables):
        lines = [",".join(columns)]
        for _ in range(rows):
            lines.append(",".join(random_word(rng) for _ in columns))
        files.append((f"table{t}.csv", ("\n".join(lines) + "\n").encode()))
    return files
