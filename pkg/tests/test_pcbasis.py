import numpy as np
import pytest

from rpcr.pcbasis import (
    Dataset,
    basis_from_raw,
    center_dataset,
    embed_row,
    load_dataset_csv,
    pc_basis,
)


def _centered(rng, n, p):
    Z = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    data = Dataset.from_arrays(Z, y)
    centered, _, _ = center_dataset(data)
    return centered


def test_center_small_example():
    data = Dataset.from_arrays(np.array([[1.0], [3.0], [2.0]]), np.array([0.0, 2.0, 1.0]))
    centered, col_means, y_mean = center_dataset(data)
    np.testing.assert_allclose(col_means, [2.0])
    assert y_mean == 1.0
    np.testing.assert_allclose(centered.Z.ravel(), [-1.0, 1.0, 0.0])
    np.testing.assert_allclose(centered.y, [-1.0, 1.0, 0.0])


def test_center_idempotent():
    rng = np.random.default_rng(0)
    first = _centered(rng, 10, 4)
    again, col_means, y_mean = center_dataset(first)
    np.testing.assert_allclose(col_means, np.zeros(4), atol=1e-15)
    assert y_mean == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(again.Z, first.Z)


def test_center_constant_column_becomes_zero():
    Z = np.column_stack([np.full(5, 7.0), np.arange(5.0)])
    centered, _, _ = center_dataset(Dataset.from_arrays(Z, np.zeros(5)))
    assert np.all(centered.Z[:, 0] == 0.0)


def test_dataset_rejects_small_n_and_nonfinite():
    with pytest.raises(ValueError):
        Dataset.from_arrays(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        Dataset.from_arrays(np.array([[1.0], [np.nan], [0.0]]), np.zeros(3))


@pytest.mark.parametrize("n,p", [(20, 5), (20, 50), (12, 12)])
def test_basis_orthogonality_and_centering(n, p):
    rng = np.random.default_rng(n * 100 + p)
    data = _centered(rng, n, p)
    basis = pc_basis(data)
    m = min(n, p)
    assert basis.m == m
    gram = basis.Utilde.T @ basis.Utilde
    assert np.abs(gram - n * np.eye(m)).max() <= 1e-8 * n
    # centering holds on live components; a dead component (d = 0) of a
    # centered matrix is an arbitrary null-space direction and, at m = n,
    # necessarily includes the constant vector
    live = basis.d > 1e-8 * basis.d[0]
    assert np.abs(basis.Utilde[:, live].sum(axis=0)).max() <= 1e-8 * np.sqrt(n)
    assert np.all(np.diff(basis.d) <= 1e-12)
    assert np.all(basis.d >= 0)


def test_basis_reconstruction():
    rng = np.random.default_rng(3)
    data = _centered(rng, 20, 50)
    basis = pc_basis(data)
    Uhat = basis.Utilde / np.sqrt(20)
    recon = Uhat @ np.diag(basis.d) @ basis.Vt
    assert np.linalg.norm(recon - data.Z) <= 1e-8 * np.linalg.norm(data.Z)


def test_rank_one_singular_values():
    u = np.array([1.0, -1.0, 0.0])
    v = np.array([3.0, 4.0])
    Z = 2.5 * np.outer(u, v)  # columns already sum to zero
    basis = pc_basis(Dataset.from_arrays(Z, np.zeros(3)))
    assert basis.d[0] == pytest.approx(2.5 * np.linalg.norm(u) * np.linalg.norm(v), rel=1e-12)
    assert basis.d[1] == pytest.approx(0.0, abs=1e-10)


def test_basis_deterministic_sign_convention():
    rng = np.random.default_rng(9)
    data = _centered(rng, 15, 6)
    a = pc_basis(data)
    b = pc_basis(data)
    np.testing.assert_array_equal(a.Utilde, b.Utilde)
    np.testing.assert_array_equal(a.d, b.d)
    # the convention itself: each column's largest-|entry| is positive
    for k in range(a.m):
        col = a.Utilde[:, k]
        assert col[np.argmax(np.abs(col))] >= 0


def test_embed_row_self_consistency():
    rng = np.random.default_rng(4)
    raw = Dataset.from_arrays(rng.standard_normal((12, 5)), rng.standard_normal(12))
    basis, centered = basis_from_raw(raw)
    for i in (0, 5, 11):
        scores = embed_row(basis, raw.Z[i] - basis.col_means)
        np.testing.assert_allclose(scores, basis.Utilde[i], atol=1e-8)


def test_embed_zero_row():
    rng = np.random.default_rng(5)
    basis, _ = basis_from_raw(
        Dataset.from_arrays(rng.standard_normal((8, 3)), np.zeros(8)))
    np.testing.assert_array_equal(embed_row(basis, np.zeros(3)), np.zeros(3))


def test_embed_rank_deficient_matches_pseudoinverse():
    """5x3 design with one dead direction: live scores match a brute-force
    pinv embedding, dead components score exactly 0."""
    rng = np.random.default_rng(6)
    B = rng.standard_normal((5, 2))
    Z = np.column_stack([B[:, 0], B[:, 1], B[:, 0] + B[:, 1]])  # rank 2
    Z -= Z.mean(axis=0)
    basis = pc_basis(Dataset.from_arrays(Z, np.zeros(5)))
    assert basis.d[2] <= 1e-10 * basis.d[0]
    z = rng.standard_normal(3)
    scores = embed_row(basis, z)
    assert scores[2] == 0.0
    # embedding inverts the forward map s -> V (D/sqrt(n)) s; the
    # minimum-norm inverse is its pseudoinverse, computed independently
    forward = basis.Vt.T @ np.diag(basis.d) / np.sqrt(5)
    expected = np.linalg.pinv(forward) @ z
    np.testing.assert_allclose(scores, expected, atol=1e-10)


def test_embed_dimension_mismatch():
    rng = np.random.default_rng(7)
    basis, _ = basis_from_raw(
        Dataset.from_arrays(rng.standard_normal((6, 4)), np.zeros(6)))
    with pytest.raises(ValueError):
        embed_row(basis, np.zeros(5))


@pytest.mark.parametrize("seed", range(5))
def test_pairwise_design_identity(seed):
    """sum_{i!=j} (x_i-x_j)(x_i-x_j)^T = 2n X^T X for centered X."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((10, 4))
    X -= X.mean(axis=0)
    lhs = np.zeros((4, 4))
    for i in range(10):
        for j in range(10):
            if i != j:
                d = X[i] - X[j]
                lhs += np.outer(d, d)
    rhs = 2 * 10 * X.T @ X
    assert np.abs(lhs - rhs).max() <= 1e-8 * np.abs(rhs).max()


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,resp\n1,2,3\n4,5,6\n7,8,10\n")
    data, names = load_dataset_csv(path, "resp")
    assert names == ["a", "b"]
    np.testing.assert_allclose(data.Z, [[1, 2], [4, 5], [7, 8]])
    np.testing.assert_allclose(data.y, [3, 6, 10])


def test_csv_missing_value_reports_location(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,resp\n1,2,3\n4,,6\n7,8,10\n")
    with pytest.raises(ValueError, match="line 3.*'b'"):
        load_dataset_csv(path, "resp")


def test_csv_rejects_unknown_response(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="nope"):
        load_dataset_csv(path, "nope")
