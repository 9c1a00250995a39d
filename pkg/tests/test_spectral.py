import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampedntk.data import circle_mode, uniform_circle
from dampedntk.kernel import GramPair, erf_ntk_matrix
from dampedntk.spectral import (
    DegenerateModeError,
    NonInvariantKernelError,
    bottom_participation,
    circle_eigenspaces,
    circle_fourier_model,
    circle_profile,
    eig_gram,
    eigenspace_correlation,
    norm_n,
    nystrom_extend,
    project,
)


def _random_psd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T / n


def test_identity_gram():
    s = eig_gram(np.eye(4))
    assert np.allclose(s.lambdas, 1.0)
    assert np.allclose(s.reconstruct(), np.eye(4), atol=1e-14)


def test_two_by_two_eigenvalues():
    s = eig_gram(np.array([[2.0, 1.0], [1.0, 2.0]]) / 2)
    np.testing.assert_allclose(s.lambdas, [1.5, 0.5], rtol=1e-14)


def test_rank_one_gram(rng):
    n = 6
    v = rng.standard_normal(n)
    v *= np.sqrt(n) / np.linalg.norm(v)
    s = eig_gram(np.outer(v, v) / n)
    assert s.lambdas[0] == pytest.approx(1.0, rel=1e-13)
    assert np.all(np.abs(s.lambdas[1:]) <= 1e-14)


def test_nonsymmetric_rejected():
    with pytest.raises(ValueError):
        eig_gram(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(n=st.integers(1, 12), seed=st.integers(0, 10_000))
def test_eigensystem_invariants(n, seed):
    rng = np.random.default_rng(seed)
    G = _random_psd(rng, n)
    s = eig_gram(G)
    assert np.all(np.diff(s.lambdas) <= 1e-12)
    np.testing.assert_allclose(s.U.T @ s.U / n, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(s.reconstruct(), G, atol=1e-10 * max(1.0, np.abs(G).max()))


def test_nystrom_reproduces_eigenvectors_on_sample():
    X = uniform_circle(40, np.random.default_rng(0))
    s = eig_gram(GramPair.from_H(erf_ntk_matrix(X)))
    for i in range(6):
        v = nystrom_extend(s, lambda Z: erf_ntk_matrix(Z, X), i)
        np.testing.assert_allclose(v(X) / np.sqrt(s.lambdas[i]), s.U[:, i], atol=1e-8)


def test_nystrom_two_points():
    rho = 0.3
    X = np.array([[0.0], [1.0]])

    def kernel(Z):
        Z = np.atleast_2d(Z)
        return np.where(np.abs(Z - X.T) < 1e-12, 1.0, rho)

    s = eig_gram(GramPair.from_H(kernel(X)))
    v = nystrom_extend(s, kernel, 0)
    Z = np.array([[0.0], [1.0], [0.5]])
    ref = kernel(Z).sum(axis=1)
    ratio = v(Z) / ref
    assert np.allclose(ratio, ratio[0])


def test_nystrom_degenerate_rejected():
    s = eig_gram(np.diag([1.0, 0.0]))
    with pytest.raises(DegenerateModeError):
        nystrom_extend(s, lambda Z: Z, 1)


def test_fourier_model_of_one_plus_cosine():
    model = circle_fourier_model(lambda d: 1 + np.cos(d), 7)
    assert model.labels[0] == "const" and model.sigmas[0] == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(model.sigmas[1:3], 0.5, atol=1e-14)
    assert set(model.labels[1:3]) == {"cos1", "sin1"}
    assert np.all(np.abs(model.sigmas[3:]) <= 1e-14)


def test_fourier_model_of_constant():
    model = circle_fourier_model(lambda d: np.full_like(np.asarray(d, dtype=float), 2.5), 5)
    assert model.sigmas[0] == pytest.approx(2.5)
    assert np.all(np.abs(model.sigmas[1:]) <= 1e-14)


def test_erf_profile_spectrum_nonincreasing_nonnegative():
    model = circle_fourier_model(circle_profile(erf_ntk_matrix), 21)
    assert np.all(np.diff(model.sigmas) <= 1e-15)
    assert np.all(model.sigmas >= -1e-8)
    assert model.kappa >= model.sigmas.sum()


def test_fourier_modes_orthonormal():
    model = circle_fourier_model(circle_profile(erf_ntk_matrix), 9)
    X = uniform_circle(4096, equispaced=True)
    P = model.evaluate(X)
    np.testing.assert_allclose(P.T @ P / 4096, np.eye(9), atol=1e-12)


def test_noninvariant_kernel_rejected():
    def k(A, B):
        return np.outer(A[:, 0], B[:, 0]) + 1.0

    with pytest.raises(NonInvariantKernelError):
        circle_profile(k)


def test_gram_spectrum_approaches_operator_spectrum():
    X = uniform_circle(1024, np.random.default_rng(3))
    s = eig_gram(GramPair.from_H(erf_ntk_matrix(X)))
    model = circle_fourier_model(circle_profile(erf_ntk_matrix), 11)
    assert np.all(np.abs(s.lambdas[:5] / model.sigmas[:5] - 1) <= 0.10)


def test_full_projection_is_identity(rng):
    s = eig_gram(_random_psd(rng, 7))
    v = rng.standard_normal(7)
    _, Pv = project(v, s, 7)
    np.testing.assert_allclose(Pv, v, atol=1e-10)
    with pytest.raises(ValueError):
        project(v, s, 0)


def test_projection_of_basis_vector(rng):
    s = eig_gram(_random_psd(rng, 6))
    coefs, _ = project(s.U[:, 2], s, 6)
    np.testing.assert_allclose(coefs, np.eye(6)[2], atol=1e-12)
    _, P2 = project(s.U[:, 2], s, 2)
    assert np.all(np.abs(P2) <= 1e-12)


@given(seed=st.integers(0, 10_000))
def test_parseval(seed):
    rng = np.random.default_rng(seed)
    s = eig_gram(_random_psd(rng, 9))
    v = rng.standard_normal(9)
    coefs, _ = project(v, s, 9)
    assert norm_n(v) ** 2 == pytest.approx(np.sum(coefs**2), abs=1e-10)


def test_participation_trivial_cases(rng):
    s = eig_gram(_random_psd(rng, 8))
    y = s.U[:, :3] @ rng.standard_normal(3)
    assert bottom_participation(y, s, 3) <= 1e-12
    assert bottom_participation(s.U[:, 7], s, 4) == pytest.approx(1.0, abs=1e-12)


def test_participation_shrinks_like_inverse_sqrt_n():
    phi = circle_mode("cos1")
    vals = []
    for n in (128, 256, 512):
        per_seed = []
        for seed in range(32):
            X = uniform_circle(n, np.random.default_rng(1000 * n + seed))
            s = eig_gram(GramPair.from_H(erf_ntk_matrix(X)))
            per_seed.append(bottom_participation(phi(X), s, 3))
        vals.append(np.mean(per_seed))
    ratios = np.array(vals[1:]) / np.array(vals[:-1])
    assert np.all(np.abs(ratios - 1 / np.sqrt(2)) <= 0.25)


def test_eigenspace_correlation_identical_spans():
    f = [circle_mode("cos2"), circle_mode("sin2")]
    assert eigenspace_correlation(f, f[::-1]) == pytest.approx(1.0, abs=1e-12)
    assert eigenspace_correlation([circle_mode("cos1")], [circle_mode("cos2")]) <= 1e-10


def test_eigenspace_grouping():
    model = circle_fourier_model(circle_profile(erf_ntk_matrix), 11)
    groups = circle_eigenspaces(model, 5)
    assert [len(g) for g in groups] == [1, 2, 2]
    assert [model.freqs[g[0]] for g in groups] == [0, 1, 2]
