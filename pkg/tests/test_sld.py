import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_distribution, random_ensemble, random_measurement, random_tangent
from qfikit.errors import ArgumentError, RankChangeError, SingularDistributionError, StateError
from qfikit.families import bell_family, classical_family, constant_family, derivative, random_family
from qfikit.metrics import classical_fisher
from qfikit.sld import (
    GramSystem,
    gram_qfi,
    optimal_measurement,
    sld_residual,
    sld_spectral,
    theorem1_qfi,
)
from qfikit.states import random_density, random_hermitian, random_unitary

seeds = st.integers(0, 2**32 - 1)


def ensemble_state(psi, p, dp):
    return (psi * p) @ psi.conj().T, (psi * dp) @ psi.conj().T


# ---------------------------------------------------------------- spectral SLD

def test_sld_pure_bell_is_twice_derivative():
    fam = bell_family()
    rho, drho = fam(0.3), derivative(fam, 0.3)
    res = sld_spectral(rho, drho)
    np.testing.assert_allclose(res.sld, 2 * drho, atol=1e-12)
    assert res.qfi == pytest.approx(4, abs=1e-12)
    assert res.skipped_pairs  # the kernel of a pure state is dropped


def test_sld_constant_is_zero():
    fam = constant_family(random_density(3, seed=0))
    res = sld_spectral(fam(0.0), derivative(fam, 0.0))
    assert res.qfi == 0.0
    np.testing.assert_array_equal(res.sld, 0)


def test_sld_diagonal_family():
    fam = classical_family(lambda x: [0.5 - x, 0.3, 0.2 + x], lambda x: [-1.0, 0.0, 1.0], 3)
    res = sld_spectral(fam(0.1), derivative(fam, 0.1))
    np.testing.assert_allclose(res.sld, np.diag([-1 / 0.4, 0, 1 / 0.3]), atol=1e-12)
    assert res.qfi == pytest.approx(classical_fisher([0.4, 0.3, 0.3], [-1, 0, 1]), rel=1e-12)


def test_sld_rank_change_raises():
    rho = np.diag([0.5, 0.5, 0.0])
    drho = np.diag([-0.1, 0.0, 0.1])
    with pytest.raises(RankChangeError):
        sld_spectral(rho, drho)


def test_sld_rejects_bad_derivatives():
    rho = np.eye(2) / 2
    with pytest.raises(ArgumentError, match="Hermitian"):
        sld_spectral(rho, [[0, 1], [0, 0]])
    with pytest.raises(ArgumentError, match="traceless"):
        sld_spectral(rho, np.eye(2))
    with pytest.raises(ArgumentError):
        sld_spectral(rho, np.zeros((3, 3)))


def test_sld_residual_1000_full_rank_families():
    rng = np.random.default_rng(31)
    for _ in range(1000):
        dim = int(rng.integers(2, 7))
        fam = random_family(dim, dim, rng)
        rho, drho = fam(0.2), derivative(fam, 0.2)
        res = sld_spectral(rho, drho)
        assert sld_residual(rho, drho, res.sld) <= 1e-8
        assert np.max(np.abs(res.sld - res.sld.conj().T)) <= 1e-10
        assert res.qfi >= -1e-8


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(2, 6))
def test_sld_residual_on_support_rank_deficient(seed, dim):
    rng = np.random.default_rng(seed)
    fam = random_family(dim, int(rng.integers(1, dim)), rng)
    rho, drho = fam(0.4), derivative(fam, 0.4)
    res = sld_spectral(rho, drho)
    assert sld_residual(rho, drho, res.sld) <= 1e-8


# ---------------------------------------------------------------- Gram method

def test_gram_orthonormal_gives_cfi():
    rng = np.random.default_rng(1)
    psi = random_unitary(4, rng)[:, :3]
    p, dp = random_distribution(rng, 3), random_tangent(rng, 3)
    sys_ = GramSystem.from_ensemble(psi.T, p, dp).solve()
    assert gram_qfi(sys_) == pytest.approx(np.sum(dp**2 / p), rel=1e-12)
    assert theorem1_qfi(p, dp, sys_.S, sys_.L) == pytest.approx(np.sum(dp**2 / p), rel=1e-12)


def test_gram_single_state_is_zero():
    sys_ = GramSystem.from_ensemble([np.array([1, 0, 0])], [1.0], [0.0]).solve()
    assert gram_qfi(sys_) == 0.0


@pytest.mark.parametrize("x", [0.3, 0.8, 1.2])
def test_gram_two_states_overlap_half(x):
    psi1 = np.array([1, 0], dtype=complex)
    psi2 = np.array([0.5, np.sqrt(3) / 2], dtype=complex)
    p = np.array([np.cos(x) ** 2, np.sin(x) ** 2])
    dp = np.array([-np.sin(2 * x), np.sin(2 * x)])
    sys_ = GramSystem.from_ensemble([psi1, psi2], p, dp).solve()
    # S is the Gram matrix of the rescaled kets sqrt(p_i) psi_i
    assert abs(sys_.S[0, 1]) / np.sqrt(p[0] * p[1]) == pytest.approx(0.5)
    rho, drho = ensemble_state(np.array([psi1, psi2]).T, p, dp)
    assert gram_qfi(sys_) == pytest.approx(sld_spectral(rho, drho).qfi, abs=1e-8)
    assert gram_qfi(sys_) < 4


def test_overlap_corrected_qfi_zero_derivatives():
    rng = np.random.default_rng(2)
    psi = random_ensemble(rng, 4, 3)
    p = random_distribution(rng, 3)
    sys_ = GramSystem.from_ensemble(psi.T, p, np.zeros(3)).solve()
    assert theorem1_qfi(p, np.zeros(3), sys_.S, sys_.L) == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_overlap_corrected_qfi_random_three_state_ensemble(seed):
    rng = np.random.default_rng(seed)
    psi = random_ensemble(rng, 3, 3)
    p, dp = random_distribution(rng, 3), random_tangent(rng, 3, 0.4)
    sys_ = GramSystem.from_ensemble(psi.T, p, dp).solve()
    rho, drho = ensemble_state(psi, p, dp)
    assert theorem1_qfi(p, dp, sys_.S, sys_.L) == pytest.approx(sld_spectral(rho, drho).qfi, abs=1e-8)


def test_overlap_corrected_qfi_index_order_matters():
    # the transposed (S L)_ij correction does not reproduce the spectral QFI
    rng = np.random.default_rng(7)
    psi = random_ensemble(rng, 3, 3)
    p, dp = random_distribution(rng, 3), random_tangent(rng, 3, 0.4)
    sys_ = GramSystem.from_ensemble(psi.T, p, dp).solve()
    S, M = sys_.S, sys_.M
    ratio = dp / p
    diff = ratio[:, None] - ratio[None, :]
    transposed = np.sum(dp**2 / p) - 0.5 * np.real(np.sum(S * diff * M))
    rho, drho = ensemble_state(psi, p, dp)
    exact = sld_spectral(rho, drho).qfi
    assert theorem1_qfi(p, dp, S, sys_.L) == pytest.approx(exact, abs=1e-10)
    assert abs(transposed - exact) > 1e-3


def test_gram_general_coefficients():
    rng = np.random.default_rng(4)
    basis = random_ensemble(rng, 4, 3)
    r = random_density(3, seed=rng).matrix
    s = basis.conj().T @ basis
    # scale R so that Tr(basis R basis^dagger) = 1
    r = r / np.real(np.trace(s @ r))
    d = random_hermitian(3, rng) * 0.1
    d = d - r * np.real(np.trace(s @ d)) / np.real(np.trace(s @ r))
    sys_ = GramSystem.from_coefficients(basis, r, d).solve()
    assert sys_.residual() <= 1e-10
    rho, drho = sys_.density(), sys_.derivative()
    res = sld_spectral(rho, drho)
    assert gram_qfi(sys_) == pytest.approx(res.qfi, abs=1e-8)
    np.testing.assert_allclose(sys_.sld_operator() @ rho + rho @ sys_.sld_operator(), 2 * drho, atol=1e-9)


def test_gram_errors():
    v = np.array([1, 0], dtype=complex)
    with pytest.raises(ArgumentError, match="linearly independent"):
        GramSystem.from_ensemble([v, v], [0.5, 0.5], [0.1, -0.1])
    with pytest.raises(SingularDistributionError):
        GramSystem.from_ensemble([v, np.array([0, 1])], [1.0, 0.0], [0, 0])
    unsolved = GramSystem.from_ensemble([v, np.array([0, 1])], [0.5, 0.5], [0.1, -0.1])
    for call in (lambda: unsolved.M, unsolved.residual, unsolved.sld_operator, lambda: gram_qfi(unsolved)):
        with pytest.raises(StateError):
            call()


def test_gram_residual_and_c6_structure():
    rng = np.random.default_rng(5)
    for _ in range(200):
        dim = int(rng.integers(2, 9))
        n = int(rng.integers(2, min(5, dim) + 1))
        psi = random_ensemble(rng, dim, n)
        p, dp = random_distribution(rng, n), random_tangent(rng, n, 0.3)
        sys_ = GramSystem.from_ensemble(psi.T, p, dp).solve()
        assert sys_.residual() <= 1e-8
        m = sys_.M
        np.testing.assert_allclose(np.real(np.diag(m)), dp / p, atol=1e-8)
        off = m + m.conj().T
        np.fill_diagonal(off, 0)
        assert np.max(np.abs(off)) <= 1e-8


def test_overlap_corrected_qfi_maximization_500_ensembles():
    rng = np.random.default_rng(6)
    for trial in range(500):
        dim = int(rng.integers(2, 9))
        n = int(rng.integers(2, min(5, dim) + 1))
        orthogonal = trial % 4 == 0
        psi = random_unitary(dim, rng)[:, :n] if orthogonal else random_ensemble(rng, dim, n)
        p, dp = random_distribution(rng, n), random_tangent(rng, n, 0.3)
        sys_ = GramSystem.from_ensemble(psi.T, p, dp).solve()
        f = theorem1_qfi(p, dp, sys_.S, sys_.L)
        cfi = classical_fisher(p, dp)
        assert f <= cfi + 1e-8
        off = np.max(np.abs(sys_.S / np.sqrt(np.outer(p, p)) - np.eye(n)))
        assert (cfi - f <= 1e-8) == (off <= 1e-10)


def test_mixture_of_fixed_states_bounded_by_cfi():
    rng = np.random.default_rng(8)
    for _ in range(200):
        dim, n = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        comps = [random_density(dim, int(rng.integers(1, dim + 1)), rng).matrix for _ in range(n)]
        p, dp = random_distribution(rng, n), random_tangent(rng, n, 0.3)
        rho = sum(pi * c for pi, c in zip(p, comps))
        drho = sum(di * c for di, c in zip(dp, comps))
        assert sld_spectral(rho, drho).qfi <= classical_fisher(p, dp) + 1e-8


# ---------------------------------------------------------------- optimal measurement

def test_optimal_measurement_bell():
    fam = bell_family()
    x = 0.7
    meas = optimal_measurement(fam(x), derivative(fam, x))
    p, dp = meas.probabilities(fam(x)), meas.probabilities(derivative(fam, x))
    assert classical_fisher(p, dp) == pytest.approx(4, abs=1e-8)


def test_optimal_measurement_constant():
    fam = constant_family(random_density(3, seed=3))
    meas = optimal_measurement(fam(0.0), derivative(fam, 0.0))
    np.testing.assert_allclose(sum(meas.projectors), np.eye(3), atol=1e-10)
    p = meas.probabilities(fam(0.0))
    assert classical_fisher(p, meas.probabilities(derivative(fam, 0.0))) == 0.0


def test_optimal_measurement_beats_random_bases():
    rng = np.random.default_rng(9)
    fam = random_family(2, 2, rng)
    rho, drho = fam(0.1), derivative(fam, 0.1)
    meas = optimal_measurement(rho, drho)
    best = classical_fisher(meas.probabilities(rho), meas.probabilities(drho))
    assert best == pytest.approx(sld_spectral(rho, drho).qfi, rel=1e-8)
    for _ in range(100):
        m = random_measurement(rng, 2)
        assert classical_fisher(m.probabilities(rho), m.probabilities(drho)) <= best + 1e-10


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 6))
def test_optimal_measurement_attains_qfi(seed, dim):
    fam = random_family(dim, dim, seed)
    rho, drho = fam(0.0), derivative(fam, 0.0)
    meas = optimal_measurement(rho, drho)
    cfi = classical_fisher(meas.probabilities(rho), meas.probabilities(drho))
    assert cfi == pytest.approx(sld_spectral(rho, drho).qfi, rel=1e-7)
