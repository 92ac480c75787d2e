import hashlib
import random

import pytest

from lakemend.errors import ArtifactError, IngestError
from lakemend.ingest import (
    ARTIFACT_MAGIC,
    lake_digest_of,
    load_index,
    load_table,
    persist_index,
    register_lake,
)
from lakemend.model import TupleRef
from lakemend.semantic import CachingEmbedder, HashingEmbedder, VectorIndex
from lakemend.syntactic import InvertedIndex

from conftest import random_lake_files


class TestLoadTable:
    def test_basic_row(self):
        _, rows = load_table(b"Name,Age\nAli,30\n", "people.csv")
        assert rows[0].attrs == (("Name", "Ali"), ("Age", "30"))
        assert rows[0].row_id == 0

    def test_short_row_keeps_empty_text(self):
        _, rows = load_table(b"Name,Age\nAli,\n", "people.csv")
        assert rows[0].get("Age") == ""

    def test_missing_trailing_fields_are_absent(self):
        _, rows = load_table(b"Name,Age\nAli\n", "people.csv")
        assert rows[0].get("Age") is None

    def test_three_rows_get_ordinal_ids(self):
        _, rows = load_table(b"A\n1\n2\n3\n", "t.csv")
        assert [t.row_id for t in rows] == [0, 1, 2]

    def test_row_longer_than_header_is_hard_error(self):
        with pytest.raises(IngestError):
            load_table(b"A,B\n1,2,3\n", "t.csv")

    def test_empty_file_rejected(self):
        with pytest.raises(IngestError):
            load_table(b"", "t.csv")

    def test_duplicate_headers_after_casefold_rejected(self):
        with pytest.raises(IngestError):
            load_table(b"Name, name \nx,y\n", "t.csv")

    def test_empty_header_cell_rejected(self):
        with pytest.raises(IngestError):
            load_table(b"Name,,Age\nx,y,z\n", "t.csv")

    def test_unbalanced_quote_names_line(self):
        with pytest.raises(IngestError, match="line"):
            load_table(b'A,B\n"open,2\n', "t.csv")

    def test_non_utf8_rejected(self):
        with pytest.raises(IngestError):
            load_table(b"A\n\xff\xfe\n", "t.csv")

    def test_quoted_fields_with_commas_and_newlines(self):
        _, rows = load_table(b'A,B\n"x,y","l1\nl2"\n', "t.csv")
        assert rows[0].get("A") == "x,y"
        assert rows[0].get("B") == "l1\nl2"

    def test_table_id_is_stem_plus_digest_prefix(self):
        data = b"A\n1\n"
        table_id, _ = load_table(data, "MyTable.csv")
        digest = hashlib.sha256(data).hexdigest()[:8]
        assert table_id == f"mytable-{digest}"

    def test_table_id_changes_with_content(self):
        id1, _ = load_table(b"A\n1\n", "t.csv")
        id2, _ = load_table(b"A\n2\n", "t.csv")
        assert id1 != id2


class TestRegisterLake:
    def test_two_tables(self, fixture_lake):
        assert len(fixture_lake.catalog.tables) == 2

    def test_same_files_same_digest(self):
        files = [("a.csv", b"A\n1\n"), ("b.csv", b"B\n2\n")]
        assert register_lake(files).digest == register_lake(files).digest

    def test_digest_order_independent(self):
        files = [("a.csv", b"A\n1\n"), ("b.csv", b"B\n2\n")]
        assert register_lake(files).digest == register_lake(list(reversed(files))).digest

    def test_bad_file_becomes_warning(self):
        lake = register_lake([("good.csv", b"A\n1\n"), ("bad.csv", b"")])
        assert len(lake.catalog.tables) == 1
        assert len(lake.warnings) == 1

    def test_zero_loadable_tables_rejected(self):
        with pytest.raises(IngestError):
            register_lake([("bad.csv", b"")])

    def test_lake_digest_of_is_sorted_sha256(self):
        digests = ["bb", "aa"]
        expected = hashlib.sha256("\n".join(sorted(digests)).encode()).hexdigest()
        assert lake_digest_of(digests) == expected

    def test_tuples_in_canonical_order(self, fixture_lake):
        refs = [(t.table_id, t.row_id) for t in fixture_lake.tuples()]
        assert refs == sorted(refs)

    def test_resolve(self, fixture_lake):
        first = fixture_lake.tuples()[0]
        assert fixture_lake.resolve(TupleRef(first.table_id, first.row_id)) is first
        with pytest.raises(KeyError):
            fixture_lake.resolve(TupleRef("nope-00000000", 0))

    def test_catalog_json_shape(self, fixture_lake):
        payload = fixture_lake.catalog.to_json()
        assert set(payload) >= {"lake_id", "tables", "created_at"}
        table = payload["tables"][0]
        assert set(table) >= {"table_id", "name", "columns", "rows", "digest"}


class TestArtifactRoundTrip:
    def _random_queries(self, rng, count=20):
        # free text with some lake-vocabulary overlap
        words = ["alpha", "beta", "gamma", "health", "zz"]
        out = []
        for _ in range(count):
            picked = [rng.choice(words) for _ in range(rng.randint(1, 4))]
            out.append(" ".join(picked))
        return out

    def test_syntactic_round_trip_query_equality(self, tmp_path, rng):
        lake = register_lake(random_lake_files(rng, tables=2, rows=5))
        index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
        path = tmp_path / "ix.lmix"
        persist_index(index, path)
        loaded = load_index(path, lake.digest)
        for q in self._random_queries(rng) + [lake.tuples()[0].attrs[0][1]]:
            assert loaded.query(q, 10) == index.query(q, 10)

    def test_semantic_round_trip_bit_exact(self, tmp_path, rng, embedder):
        lake = register_lake(random_lake_files(rng, tables=1, rows=6))
        index = VectorIndex.build(lake.tuples(), embedder, lake.digest)
        path = tmp_path / "ix.lmix"
        persist_index(index, path)
        loaded = load_index(path, lake.digest)
        assert loaded.to_body() == index.to_body()
        for q in self._random_queries(rng, 5):
            assert loaded.query_text(q, 5, embedder) == index.query_text(q, 5, embedder)

    def test_corrupted_magic_rejected(self, tmp_path, rng):
        lake = register_lake(random_lake_files(rng, tables=1, rows=2))
        index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
        path = tmp_path / "ix.lmix"
        persist_index(index, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(ArtifactError):
            load_index(path)

    def test_version_mismatch_rejected(self, tmp_path, rng):
        lake = register_lake(random_lake_files(rng, tables=1, rows=2))
        index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
        path = tmp_path / "ix.lmix"
        persist_index(index, path)
        data = bytearray(path.read_bytes())
        data[len(ARTIFACT_MAGIC)] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(ArtifactError):
            load_index(path)

    def test_digest_mismatch_rejected(self, tmp_path, rng):
        lake = register_lake(random_lake_files(rng, tables=1, rows=2))
        index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
        path = tmp_path / "ix.lmix"
        persist_index(index, path)
        with pytest.raises(ArtifactError):
            load_index(path, "0" * 64)

    def test_truncated_artifact_rejected(self, tmp_path, rng):
        lake = register_lake(random_lake_files(rng, tables=1, rows=3))
        index = InvertedIndex.build(lake.tuples(), lake_digest=lake.digest)
        path = tmp_path / "ix.lmix"
        persist_index(index, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(ArtifactError):
            load_index(path)


def test_ingestion_lossless_cell_multiset():
    data = b'A,B\n"x,1",2\ny,\n'
    _, rows = load_table(data, "t.csv")
    cells = sorted(v for t in rows for _, v in t.attrs if v is not None)
    assert cells == ["", "2", "x,1", "y"]
