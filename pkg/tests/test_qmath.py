import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from conftest import dims, random_state, seeds
from rsp_lab import qmath
from rsp_lab.errors import DimMismatch, NotHermitian, NotPSD, NotSquare, NotUnitTrace, ReducedStateMismatch

S = 1 / math.sqrt(2)


def _fidelity_oracle(rho, sigma):
    r = scipy.linalg.sqrtm(rho)
    return float(np.trace(scipy.linalg.sqrtm(r @ sigma @ r)).real)


def _relent_oracle(rho, sigma):
    # full-rank inputs only
    return float(np.trace(rho @ (scipy.linalg.logm(rho) - scipy.linalg.logm(sigma))).real / math.log(2))


@pytest.mark.parametrize("a, b, expected", [
    (qmath.ket(1, 0), qmath.ket(0, 1), 0.0),
    (qmath.ket(1, 0), qmath.ket(S, S), S),
    (qmath.ket(1, 0), qmath.ket(1, 1j), S),
    (qmath.ket(1, 2, 3), qmath.ket(1, 2, 3), 1.0),
])
def test_fidelity_pure_states_is_overlap(a, b, expected):
    assert qmath.fidelity(qmath.projector(a), qmath.projector(b)) == pytest.approx(expected, abs=1e-12)


def test_fidelity_mixed_closed_form():
    # qubit diagonal states: classical Bhattacharyya coefficient
    rho, sigma = np.diag([0.75, 0.25]), np.diag([0.25, 0.75])
    assert qmath.fidelity(rho, sigma) == pytest.approx(2 * math.sqrt(0.75 * 0.25), abs=1e-14)
    assert qmath.fidelity(qmath.projector([1, 0]), qmath.maximally_mixed(2)) == pytest.approx(S, abs=1e-14)


@given(seeds, st.integers(2, 4))
def test_fidelity_matches_scipy_oracle(seed, dim):
    rho, sigma = random_state(seed, dim), random_state(seed + 1, dim)
    assert qmath.fidelity(rho, sigma) == pytest.approx(_fidelity_oracle(rho.matrix, sigma.matrix), abs=1e-9)


@given(seeds, dims)
def test_fidelity_symmetric_and_bounded(seed, dim):
    rho, sigma = random_state(seed, dim, rank=1 + seed % dim), random_state(seed ^ 0xABCDEF, dim)
    f = qmath.fidelity(rho, sigma)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(qmath.fidelity(sigma, rho), abs=1e-9)
    assert qmath.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)


@given(seeds, dims)
def test_fuchs_van_de_graaf(seed, dim):
    rho, sigma = random_state(seed, dim), random_state(seed + 7, dim)
    f, t = qmath.fidelity(rho, sigma), qmath.trace_distance(rho, sigma)
    assert 1 - f <= t + 1e-9
    assert t <= math.sqrt(max(1 - f * f, 0.0)) + 1e-9


def test_trace_distance_orthogonal_and_equal():
    assert qmath.trace_distance(qmath.projector([1, 0]), qmath.projector([0, 1])) == pytest.approx(1.0)
    assert qmath.trace_distance(qmath.maximally_mixed(3), qmath.maximally_mixed(3)) == 0.0


@pytest.mark.parametrize("probs, h", [([1.0], 0.0), ([0.5, 0.5], 1.0), ([0.25] * 4, 2.0), ([1.0, 0.0], 0.0)])
def test_shannon_entropy(probs, h):
    assert qmath.shannon_entropy(probs) == pytest.approx(h)


@given(seeds, dims)
def test_von_neumann_entropy_bounds(seed, dim):
    s = qmath.von_neumann_entropy(random_state(seed, dim))
    assert -1e-12 <= s <= math.log2(dim) + 1e-12
    assert qmath.von_neumann_entropy(qmath.maximally_mixed(dim)) == pytest.approx(math.log2(dim))


def test_relative_entropy_support_violation_is_inf():
    assert qmath.relative_entropy(qmath.projector([0, 1]), qmath.projector([1, 0])) == math.inf
    assert qmath.relative_entropy(qmath.maximally_mixed(2), qmath.projector([1, 0])) == math.inf


def test_relative_entropy_pure_vs_mixed():
    assert qmath.relative_entropy(qmath.projector([1, 0]), qmath.maximally_mixed(2)) == pytest.approx(1.0)
    # a pure state inside a rank-deficient support is still finite
    sigma = qmath.validate_density(np.diag([0.5, 0.5, 0.0]))
    assert qmath.relative_entropy(qmath.projector([S, S, 0]), sigma) == pytest.approx(1.0)


@given(seeds, st.integers(2, 4))
def test_relative_entropy_matches_scipy_oracle(seed, dim):
    rho, sigma = random_state(seed, dim), random_state(seed + 3, dim)
    d = qmath.relative_entropy(rho, sigma)
    assert d >= 0.0
    assert d == pytest.approx(_relent_oracle(rho.matrix, sigma.matrix), abs=1e-7)


@given(seeds, dims, st.integers(1, 4))
def test_purification_roundtrip(seed, dim, rank):
    rho = random_state(seed, dim, rank=min(rank, dim))
    psi = qmath.purify(rho)
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0)
    back = qmath.partial_trace(psi, "B")
    assert np.max(np.abs(back.matrix - rho.matrix)) <= 1e-8


def test_partial_trace_of_bell_state():
    bell = qmath.bipartite(np.eye(2) * S)
    for keep in "AB":
        assert np.allclose(qmath.partial_trace(bell, keep).matrix, np.eye(2) / 2)
    full = np.outer(bell.amplitudes, bell.amplitudes.conj())
    assert np.allclose(qmath.partial_trace(full, "B", dims=(2, 2)).matrix, np.eye(2) / 2)


def test_partial_trace_product_state_density_input():
    a, b = random_state(1, 2), random_state(2, 3)
    prod = np.kron(a.matrix, b.matrix)
    assert np.allclose(qmath.partial_trace(prod, "A", dims=(2, 3)).matrix, a.matrix)
    assert np.allclose(qmath.partial_trace(prod, "B", dims=(2, 3)).matrix, b.matrix)
    with pytest.raises(DimMismatch):
        qmath.partial_trace(prod, "A", dims=(3, 3))


@given(seeds, dims, st.integers(1, 4))
def test_uhlmann_maps_purifications(seed, dim, rank):
    rng = np.random.default_rng(seed)
    rho = random_state(seed, dim, rank=min(rank, dim))
    psi = qmath.purify(rho)
    # a second purification: random Alice unitary on the canonical one
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    v, _ = np.linalg.qr(g)
    other = psi.apply_alice(v)
    u = qmath.uhlmann_unitary(psi, other)
    assert np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-9)
    assert qmath.transition_residual(u, psi, other) <= 1e-8


def test_uhlmann_degenerate_marginal():
    # maximally entangled states: every Alice unitary is a valid transition
    bell = qmath.bipartite(np.eye(3) / math.sqrt(3))
    twisted = bell.apply_alice(np.diag([1, 1j, -1]))
    u = qmath.uhlmann_unitary(bell, twisted)
    assert qmath.transition_residual(u, bell, twisted) <= 1e-10


def test_uhlmann_rejects_mismatched_marginals():
    with pytest.raises(ReducedStateMismatch):
        qmath.uhlmann_unitary(qmath.purify(qmath.projector([1, 0])), qmath.purify(qmath.maximally_mixed(2)))


@given(seeds, st.integers(2, 4))
def test_aligning_overlap_equals_fidelity(seed, dim):
    rho, sigma = random_state(seed, dim), random_state(seed + 11, dim)
    a, b = qmath.purify(rho), qmath.purify(sigma)
    u = qmath.aligning_unitary(a, b)
    ov = qmath.overlap(b, a.apply_alice(u))
    assert ov.real == pytest.approx(qmath.fidelity(rho, sigma), abs=1e-9)
    assert abs(ov.imag) <= 1e-9


def test_pad_alice_keeps_marginal():
    psi = qmath.purify(random_state(5, 3))
    padded = qmath.pad_alice(psi, 5)
    assert padded.dim_a == 5
    assert np.allclose(qmath.partial_trace(padded, "B").matrix, qmath.partial_trace(psi, "B").matrix)
    with pytest.raises(DimMismatch):
        qmath.pad_alice(psi, 2)


@pytest.mark.parametrize("m, err", [
    (np.ones((2, 3)) / 2, NotSquare),
    (np.array([[0.5, 0.1], [0.0, 0.5]]), NotHermitian),
    (np.eye(2), NotUnitTrace),
    (np.diag([1.5, -0.5]), NotPSD),
])
def test_validate_density_names_invariant(m, err):
    with pytest.raises(err) as info:
        qmath.validate_density(m)
    assert info.value.invariant == err.invariant


def test_validate_density_renormalizes_within_tolerance():
    m = np.diag([0.5, 0.5 + 5e-10])
    rho = qmath.validate_density(m)
    assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-15)
    assert not rho.matrix.flags.writeable


def test_spectrum_is_descending_with_fixed_phase():
    rho = random_state(9, 4)
    vals, vecs = rho.spectrum
    assert np.all(np.diff(vals) <= 0)
    for col in vecs.T:
        lead = col[np.argmax(np.abs(col) > 1e-12 * np.abs(col).max())]
        assert abs(lead.imag) < 1e-12 and lead.real > 0


def test_operator_leq_witness():
    res = qmath.operator_leq(np.diag([0.5, 0.0]), np.diag([0.4, 1.0]))
    assert not res.holds
    assert res.min_eigenvalue == pytest.approx(-0.1)
    assert abs(res.witness[0]) == pytest.approx(1.0)
    assert qmath.operator_leq(0.5 * np.eye(2), np.eye(2)).holds


def test_support_contained():
    sigma = qmath.validate_density(np.diag([0.5, 0.5, 0.0]))
    assert qmath.support_contained(qmath.projector([1, 1, 0]), sigma)
    assert not qmath.support_contained(qmath.projector([1, 0, 1]), sigma)


def test_dim_mismatch():
    with pytest.raises(DimMismatch):
        qmath.fidelity(qmath.maximally_mixed(2), qmath.maximally_mixed(3))
