import numpy as np
import pytest

from proxqn.dataset import (
    DatasetFormatError,
    dataset_stats,
    read_libsvm,
    synthesize_quadratic,
    write_libsvm,
)

from conftest import make_dataset


def write_lines(tmp_path, lines, name="data.txt"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestReadLibsvm:
    def test_basic_line(self, tmp_path):
        ds = read_libsvm(write_lines(tmp_path, ["+1 1:0.5 3:2.0", "-1 2:1.0"]))
        assert ds.labels[0] == 1.0
        idx, val = ds.row(0)
        np.testing.assert_array_equal(idx, [0, 2])
        np.testing.assert_allclose(val, [0.5, 2.0])
        assert ds.n_features == 3
        assert ds.n_points == 2

    def test_zero_one_labels_mapped(self, tmp_path):
        ds = read_libsvm(write_lines(tmp_path, ["0 1:1", "1 1:2"]))
        np.testing.assert_array_equal(ds.labels, [-1.0, 1.0])

    def test_positive_label_binarizes(self, tmp_path):
        ds = read_libsvm(write_lines(tmp_path, ["3 1:1", "1 1:2", "2 1:3"]),
                         positive_label="3")
        np.testing.assert_array_equal(ds.labels, [1.0, -1.0, -1.0])

    def test_multiclass_without_positive_label_fails(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="positive_label"):
            read_libsvm(write_lines(tmp_path, ["3 1:1", "1 1:2", "2 1:3"]))

    def test_malformed_entry_reports_line(self, tmp_path):
        with pytest.raises(DatasetFormatError, match=":2"):
            read_libsvm(write_lines(tmp_path, ["+1 1:0.5", "-1 oops"]))

    def test_nonincreasing_indices_rejected(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="increasing"):
            read_libsvm(write_lines(tmp_path, ["+1 2:1.0 2:2.0"]))

    def test_zero_based_index_rejected(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="1-based"):
            read_libsvm(write_lines(tmp_path, ["+1 0:1.0"]))

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("\n\n")
        with pytest.raises(DatasetFormatError, match="no data"):
            read_libsvm(str(path))

    def test_n_features_override(self, tmp_path):
        ds = read_libsvm(write_lines(tmp_path, ["+1 1:1.0"]), n_features=10)
        assert ds.n_features == 10

    def test_n_features_override_too_small(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="below max index"):
            read_libsvm(write_lines(tmp_path, ["+1 5:1.0"]), n_features=3)

    def test_line_permutation_permutes_rows(self, tmp_path):
        lines = ["+1 1:0.5 3:2.0", "-1 2:1.5", "+1 1:3.0"]
        ds = read_libsvm(write_lines(tmp_path, lines, "a.txt"))
        perm = [2, 0, 1]
        ds_perm = read_libsvm(write_lines(
            tmp_path, [lines[i] for i in perm], "b.txt"))
        for new_i, old_i in enumerate(perm):
            oi, ov = ds.row(old_i)
            ni, nv = ds_perm.row(new_i)
            np.testing.assert_array_equal(oi, ni)
            np.testing.assert_array_equal(ov, nv)
            assert ds.labels[old_i] == ds_perm.labels[new_i]


class TestRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        rows = []
        for _ in range(25):
            picks = sorted(rng.choice(12, size=rng.integers(1, 6),
                                      replace=False))
            rows.append([(int(j), float(rng.standard_normal()
                                        * 10.0 ** float(rng.integers(-8, 9))))
                         for j in picks])
        labels = np.where(rng.standard_normal(25) > 0, 1.0, -1.0)
        ds = make_dataset(rows, labels, n_features=12)
        path = str(tmp_path / "rt.txt")
        write_libsvm(ds, path)
        back = read_libsvm(path, n_features=12)
        np.testing.assert_array_equal(ds.labels, back.labels)
        for i in range(ds.n_points):
            oi, ov = ds.row(i)
            ni, nv = back.row(i)
            np.testing.assert_array_equal(oi, ni)
            assert all(a == b for a, b in zip(ov, nv)), "values must round-trip bit-exactly"


class TestStats:
    def test_counts(self):
        ds = make_dataset([[(0, 1.0), (2, 2.0)], [(1, 3.0)]], [1, -1])
        st = dataset_stats(ds)
        assert (st.n_features, st.n_points, st.nnz) == (3, 2, 3)
        assert (st.n_positive, st.n_negative) == (1, 1)

    def test_single_row_nnz(self):
        ds = make_dataset([[(0, 1.0), (1, 1.0), (4, 2.0)]], [1], n_features=5)
        assert dataset_stats(ds).nnz == 3


class TestSynthesizeQuadratic:
    def test_flat_spectrum_gives_identity(self):
        quad = synthesize_quadratic(2, 1.0, 1.0, seed=0)
        np.testing.assert_allclose(quad.dense(), np.eye(2), atol=1e-14)

    def test_spectrum_endpoints_exact(self):
        quad = synthesize_quadratic(50, 0.1, 10.0, seed=7)
        eigs = np.linalg.eigvalsh(quad.dense())
        assert abs(eigs[0] - 0.1) <= 1e-10
        assert abs(eigs[-1] - 10.0) <= 1e-10
        assert np.all(eigs >= 0.1 - 1e-10) and np.all(eigs <= 10.0 + 1e-10)

    def test_deterministic_given_seed(self):
        a = synthesize_quadratic(20, 0.5, 5.0, seed=42)
        b = synthesize_quadratic(20, 0.5, 5.0, seed=42)
        np.testing.assert_array_equal(a.dense(), b.dense())
        np.testing.assert_array_equal(a.b, b.b)
        c = synthesize_quadratic(20, 0.5, 5.0, seed=43)
        assert not np.array_equal(a.b, c.b)

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            synthesize_quadratic(5, 0.0, 1.0, 0)
        with pytest.raises(ValueError):
            synthesize_quadratic(5, 2.0, 1.0, 0)

    def test_matvec_matches_dense(self):
        quad = synthesize_quadratic(15, 0.2, 3.0, seed=3)
        v = np.random.default_rng(0).standard_normal(15)
        np.testing.assert_allclose(quad.matvec(v), quad.dense() @ v,
                                   rtol=1e-12, atol=1e-12)
