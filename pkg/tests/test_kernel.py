import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kelp.kernel import (DEFAULT_CANDIDATES, DegenerateKernelError, KernelSpec,
                         QCappedWarning, basis_from_dict, basis_to_dict, build_basis,
                         double_center, gram, kpca, nystrom_features, select_q)

I2 = np.eye(2)


def centered_orthonormal(p, k, seed=0):
    """``k`` orthonormal columns orthogonal to the ones vector."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((p, k))
    X -= X.mean(axis=0)
    Q, _ = np.linalg.qr(X)
    return Q


def test_linear_gram_of_identity_rows():
    assert np.array_equal(gram(KernelSpec.linear(), I2), I2)


def test_gaussian_gram_diagonal_is_one():
    E = np.random.default_rng(1).standard_normal((6, 3))
    K = gram(KernelSpec.gaussian(0.37), E)
    assert np.array_equal(np.diag(K), np.ones(6))


def test_polynomial_gram_by_hand():
    K = gram(KernelSpec.polynomial(2, 1.0), I2)
    assert np.allclose(K, [[4, 1], [1, 4]], rtol=0, atol=1e-15)


def test_gram_is_exactly_symmetric():
    E = np.random.default_rng(2).standard_normal((30, 5))
    for spec in (KernelSpec.linear(), KernelSpec.gaussian(0.1), KernelSpec.polynomial(3, 0.5)):
        K = gram(spec, E)
        assert np.array_equal(K, K.T)


def test_gram_rejects_baseline():
    with pytest.raises(ValueError):
        gram(KernelSpec.baseline(), I2)


@pytest.mark.parametrize("spec", [KernelSpec.linear(), KernelSpec.gaussian(0.01), KernelSpec.gaussian(1.0)])
def test_gram_psd(spec):
    E = np.random.default_rng(3).standard_normal((40, 6))
    w = np.linalg.eigvalsh(gram(spec, E))
    assert w.min() >= -1e-8 * w.max()


@pytest.mark.parametrize("text, spec", [
    ("linear", KernelSpec.linear()),
    ("baseline", KernelSpec.baseline()),
    ("gaussian:0.01", KernelSpec.gaussian(0.01)),
    ("poly:3:1.5", KernelSpec.polynomial(3, 1.5)),
])
def test_kernel_grammar_round_trip(text, spec):
    assert KernelSpec.parse(text) == spec
    assert KernelSpec.parse(str(spec)) == spec


@pytest.mark.parametrize("text", ["gaussian", "gaussian:-1", "poly:0:1", "poly:2:-1", "rbf", "poly:1.5:0"])
def test_kernel_grammar_rejects(text):
    with pytest.raises(ValueError):
        KernelSpec.parse(text)


def test_default_grid():
    assert [str(k) for k in DEFAULT_CANDIDATES] == [
        "linear", "gaussian:0.001", "gaussian:0.01", "gaussian:0.1", "baseline"]


def test_double_center_examples():
    half = np.array([[0.5, -0.5], [-0.5, 0.5]])
    assert np.allclose(double_center(I2), half, atol=1e-15)
    assert np.allclose(double_center(np.ones((3, 3))), 0, atol=1e-15)
    assert np.allclose(double_center([[2.0, 0.0], [0.0, 0.0]]), half, atol=1e-15)


def test_double_center_rejects_non_square():
    with pytest.raises(ValueError):
        double_center(np.ones((2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_double_center_sums_and_idempotence(p, seed):
    A = np.random.default_rng(seed).standard_normal((p, p))
    Kc = double_center(A + A.T)
    assert np.abs(Kc.sum(axis=0)).max() < 1e-10
    assert np.abs(Kc.sum(axis=1)).max() < 1e-10
    assert np.abs(double_center(Kc) - Kc).max() < 1e-10


@pytest.mark.parametrize("delta, q", [(0.05, 4), (0.3, 2)])
def test_energy_selection_from_known_spectrum(delta, q):
    Q = centered_orthonormal(5, 4)
    Kc = Q @ np.diag([4.0, 3.0, 2.0, 1.0]) @ Q.T
    basis = kpca(Kc, delta=delta)
    assert basis.q == q
    assert np.allclose(basis.mu, [4.0, 3.0, 2.0, 1.0][:q])


def test_select_q_arithmetic():
    assert select_q([4, 3, 2, 1], 0.05) == 4
    assert select_q([4, 3, 2, 1], 0.3) == 2
    assert select_q([4, 3, 2, 1], 0.65) == 1


def test_kpca_centered_identity():
    basis = kpca(double_center(I2), delta=0.5)
    assert basis.q == 1
    assert np.isclose(basis.mu[0], 1.0)
    assert np.allclose(np.abs(basis.Phi[:, 0]), [2**-0.5, 2**-0.5])
    assert np.isclose(basis.Phi[0, 0], -basis.Phi[1, 0])


def test_kpca_degenerate_kernel():
    with pytest.raises(DegenerateKernelError):
        kpca(double_center(np.ones((4, 4))))


def test_kpca_caps_fixed_q_with_warning():
    with pytest.warns(QCappedWarning):
        basis = kpca(double_center(I2), q=5)
    assert basis.q == 1


@pytest.fixture(scope="module")
def embeddings():
    rng = np.random.default_rng(11)
    E = rng.standard_normal((60, 5))
    return E / np.linalg.norm(E, axis=1, keepdims=True)


@pytest.mark.parametrize("spec", [KernelSpec.linear(), KernelSpec.gaussian(0.5),
                                  KernelSpec.polynomial(2, 1.0)])
def test_basis_invariants(embeddings, spec):
    b = build_basis(spec, embeddings, delta=0.01)
    assert np.abs(b.Phi.T @ b.Phi - np.eye(b.q)).max() < 1e-8
    assert np.abs(b.Phi.T @ np.ones(b.p)).max() < 1e-8
    assert np.abs(b.Psi.T @ b.Psi - np.diag(b.mu)).max() < 1e-8 * max(1.0, b.mu[0])
    assert np.all(b.mu > 0) and np.all(np.diff(b.mu) <= 0)


def test_reconstruction_without_clamping(embeddings):
    Kc = double_center(gram(KernelSpec.gaussian(0.5), embeddings))
    b = kpca(Kc, q=Kc.shape[0] - 1)
    recon = b.Phi @ np.diag(b.mu) @ b.Phi.T
    assert np.linalg.norm(recon - Kc) <= 1e-6 * np.linalg.norm(Kc)


def test_energy_monotone_in_delta(embeddings):
    Kc = double_center(gram(KernelSpec.gaussian(2.0), embeddings))
    qs = [kpca(Kc, delta=d).q for d in (0.5, 0.3, 0.1, 0.05, 0.01, 1e-4)]
    assert qs == sorted(qs)


@pytest.mark.parametrize("spec", [KernelSpec.linear(), KernelSpec.gaussian(0.001),
                                  KernelSpec.gaussian(0.1), KernelSpec.gaussian(3.0),
                                  KernelSpec.polynomial(2, 1.0)])
def test_nystrom_reproduces_training_rows(embeddings, spec):
    b = build_basis(spec, embeddings, delta=0.05)
    psi = nystrom_features(b, embeddings)
    scale = np.abs(b.Psi).max()
    assert np.abs(psi - b.Psi).max() <= 1e-8 * scale


def test_nystrom_single_vector_and_zero_input(embeddings):
    b = build_basis(KernelSpec.linear(), embeddings, delta=0.05)
    assert np.allclose(nystrom_features(b, embeddings[3]), b.Psi[3], atol=1e-10)
    zero = nystrom_features(b, np.zeros(5))
    assert np.allclose(zero, -(b.Phi.T @ b.kbar) / np.sqrt(b.mu), atol=1e-12)


def test_nystrom_identity_rows_example():
    b = build_basis(KernelSpec.linear(), I2, q=1)
    assert np.allclose(nystrom_features(b, I2[0]), b.Psi[0], atol=1e-15)


def test_nystrom_errors(embeddings):
    b = build_basis(KernelSpec.linear(), embeddings, delta=0.05)
    with pytest.raises(ValueError, match="dimension"):
        nystrom_features(b, np.zeros(4))
    with pytest.raises(ValueError, match="does not match"):
        nystrom_features(b, embeddings[0], spec=KernelSpec.gaussian(1.0))


def test_basis_document_round_trip(embeddings):
    b = build_basis(KernelSpec.gaussian(0.1), embeddings, delta=0.05)
    back = basis_from_dict(basis_to_dict(b))
    assert back.spec == b.spec and back.q == b.q
    for name in ("Phi", "mu", "kbar", "train"):
        assert np.array_equal(getattr(back, name), getattr(b, name))
