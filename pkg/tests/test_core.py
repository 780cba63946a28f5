"""Core formats, tokenization, and splitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptcert.core import (
    DataFormatError,
    DegenerateRowError,
    DuplicateTokenError,
    EmbeddingDataset,
    LabelRangeError,
    PromptSet,
    SplitSpec,
    TruncatedFileError,
    UnknownTokenError,
    Vocabulary,
    detokenize,
    fnv1a64,
    load_embeddings,
    load_labels,
    load_prompt_set,
    load_vocabulary,
    normalize_rows,
    read_matrix,
    save_prompt_set,
    split_dataset,
    tokenize,
    write_labels,
    write_matrix,
    write_vocabulary,
)


def test_fnv1a64_known_values():
    # Standard FNV-1a reference vectors.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


class TestPbem:
    def test_write_read_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(42)
        matrix = rng.standard_normal((10, 8)).astype(np.float32)
        path = tmp_path / "m.pbem"
        write_matrix(matrix, path)
        again = read_matrix(path)
        assert again.dtype == np.float32
        assert np.array_equal(matrix, again)
        # Re-serialization is byte-identical.
        path2 = tmp_path / "m2.pbem"
        write_matrix(again, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_normalization_on_load(self, tmp_path):
        path = tmp_path / "m.pbem"
        write_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]), path)
        ds = load_embeddings(path)
        assert np.allclose(ds.embeddings, [[1, 0, 0], [0, 1, 0]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.pbem"
        write_matrix(np.zeros((1, 1)) + 1.0, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(DataFormatError, match="magic"):
            read_matrix(path)

    def test_bad_version_and_dtype(self, tmp_path):
        path = tmp_path / "m.pbem"
        write_matrix(np.ones((2, 2)), path)
        data = bytearray(path.read_bytes())
        data[4] = 9
        path.write_bytes(bytes(data))
        with pytest.raises(DataFormatError, match="version"):
            read_matrix(path)
        data[4] = 1
        data[8] = 7
        path.write_bytes(bytes(data))
        with pytest.raises(DataFormatError, match="dtype"):
            read_matrix(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "m.pbem"
        write_matrix(np.ones((4, 3)), path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 12])  # drop one row
        with pytest.raises(TruncatedFileError):
            read_matrix(path)

    def test_trailing_garbage(self, tmp_path):
        path = tmp_path / "m.pbem"
        write_matrix(np.ones((2, 2)), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(TruncatedFileError):
            read_matrix(path)

    def test_zero_norm_row_rejected(self, tmp_path):
        path = tmp_path / "m.pbem"
        write_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]), path)
        with pytest.raises(DegenerateRowError, match="index 1"):
            load_embeddings(path)


class TestPblb:
    def test_roundtrip(self, tmp_path):
        labels = np.random.default_rng(7).integers(0, 10, size=100)
        path = tmp_path / "l.pblb"
        write_labels(labels, path)
        assert np.array_equal(load_labels(path), labels)

    def test_attach_validates_range(self, tmp_path):
        path = tmp_path / "l.pblb"
        write_labels([0, 1, 0], path)
        emb = normalize_rows(np.random.default_rng(0).standard_normal((3, 4)))
        ds = EmbeddingDataset(emb).with_labels(load_labels(path), num_classes=2)
        assert ds.num_classes == 2
        write_labels([0, 5, 1], path)
        with pytest.raises(LabelRangeError):
            EmbeddingDataset(emb).with_labels(load_labels(path), num_classes=3)

    def test_bad_magic_and_truncation(self, tmp_path):
        path = tmp_path / "l.pblb"
        write_labels([1, 2, 3], path)
        data = path.read_bytes()
        path.write_bytes(b"XXXX" + data[4:])
        with pytest.raises(DataFormatError):
            load_labels(path)
        path.write_bytes(data[:-4])
        with pytest.raises(TruncatedFileError):
            load_labels(path)


class TestVocabulary:
    def test_load_simple(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("cat\ndog\n", encoding="utf-8")
        vocab = load_vocabulary(path)
        assert vocab.tokens == ("cat", "dog")
        assert vocab.size == 2

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("cat\ndog\ncat\n", encoding="utf-8")
        with pytest.raises(DuplicateTokenError, match="cat"):
            load_vocabulary(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_vocabulary(path)

    def test_large_vocab_size(self, tmp_path):
        # Scale check: a vocabulary the size of a real text tower's loads intact.
        path = tmp_path / "big.txt"
        path.write_text("\n".join(f"t{i}" for i in range(49408)) + "\n", encoding="utf-8")
        assert load_vocabulary(path).size == 49408

    def test_hash_matches_file_bytes(self, tmp_path):
        path = tmp_path / "v.txt"
        write_vocabulary(Vocabulary(("a", "b", "c")), path)
        vocab = load_vocabulary(path)
        assert vocab.source_hash == f"{fnv1a64(path.read_bytes()):016x}"


class TestTokenize:
    def setup_method(self):
        self.vocab = Vocabulary(("cat", "dog"))

    def test_basic(self):
        assert tokenize("cat dog", self.vocab) == [0, 1]

    def test_unknown_token_named(self):
        with pytest.raises(UnknownTokenError, match="fish"):
            tokenize("cat fish", self.vocab)

    def test_empty_text(self):
        assert tokenize("", self.vocab) == []

    @given(st.lists(st.sampled_from(["cat", "dog"]), max_size=8))
    def test_detokenize_roundtrip(self, pieces):
        ids = tokenize(" ".join(pieces), self.vocab)
        assert tokenize(detokenize(ids, self.vocab), self.vocab) == ids


class TestPromptSetIo:
    def test_roundtrip_and_hash_check(self, tmp_path):
        vocab = Vocabulary(("a", "b", "c"))
        ps = PromptSet(((0, 1), (2,)), initial_prompt=(1,))
        path = tmp_path / "p.json"
        save_prompt_set(ps, path, vocab)
        again = load_prompt_set(path, vocab)
        assert again == ps
        other = Vocabulary(("x", "y", "z"))
        with pytest.raises(DataFormatError, match="different vocabulary"):
            load_prompt_set(path, other)

    def test_out_of_range_token_rejected(self, tmp_path):
        vocab = Vocabulary(("a", "b"))
        path = tmp_path / "p.json"
        path.write_text('{"class_prompts": [[5]], "initial_prompt": []}')
        with pytest.raises(ValueError, match="out of range"):
            load_prompt_set(path, vocab)


def _dataset(n=10, d=4, seed=0, k=2):
    rng = np.random.default_rng(seed)
    emb = normalize_rows(rng.standard_normal((n, d)))
    return EmbeddingDataset(emb, rng.integers(0, k, n), k)


class TestSplit:
    def test_partition(self):
        ds = _dataset(10)
        train, test = split_dataset(ds, SplitSpec(0.5, seed=7))
        assert train.n == 5 and test.n == 5
        combined = np.vstack([train.embeddings, test.embeddings])
        assert np.array_equal(
            np.sort(combined, axis=0), np.sort(ds.embeddings, axis=0)
        )

    def test_full_fraction_empty_test(self):
        ds = _dataset(10)
        train, test = split_dataset(ds, SplitSpec(1.0, seed=1))
        assert train.n == 10 and test.n == 0

    def test_determinism(self):
        ds = _dataset(20)
        a = split_dataset(ds, SplitSpec(0.3, seed=5))
        b = split_dataset(ds, SplitSpec(0.3, seed=5))
        assert np.array_equal(a[0].embeddings, b[0].embeddings)
        assert np.array_equal(a[1].labels, b[1].labels)

    @given(
        st.integers(min_value=1, max_value=40),
        st.floats(min_value=0.01, max_value=1.0),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_partition_property(self, n, fraction, seed):
        # Continuous random rows are distinct, so row bytes identify indices.
        ds = _dataset(n)
        train, test = split_dataset(ds, SplitSpec(fraction, seed))
        assert train.n + test.n == n
        rows = lambda m: {row.tobytes() for row in m}
        assert len(rows(ds.embeddings)) == n
        assert rows(train.embeddings) | rows(test.embeddings) == rows(ds.embeddings)
        assert not rows(train.embeddings) & rows(test.embeddings)

    def test_fraction_out_of_range(self):
        with pytest.raises(ValueError):
            SplitSpec(0.0, seed=1)
        with pytest.raises(ValueError):
            SplitSpec(1.5, seed=1)


class TestDatasetInvariants:
    def test_norms_validated(self):
        with pytest.raises(ValueError, match="norm"):
            EmbeddingDataset(np.array([[2.0, 0.0]]))

    def test_label_count_mismatch(self):
        emb = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="label count"):
            EmbeddingDataset(emb, [0], 2)

    def test_loaded_rows_unit_norm(self, tmp_path):
        rng = np.random.default_rng(3)
        path = tmp_path / "m.pbem"
        write_matrix(rng.standard_normal((50, 6)) * 3.0, path)
        ds = load_embeddings(path)
        norms = np.linalg.norm(ds.embeddings, axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-4)
