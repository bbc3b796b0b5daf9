"""Dense linear algebra for finite-dimensional quantum states.

Conventions used everywhere in the package:

* logarithms are base 2, so entropies are in bits;
* fidelity is the square-root fidelity ``F(rho, sigma) = Tr sqrt(sqrt(rho) sigma sqrt(rho))``;
* bipartite amplitudes are stored Alice-first, i.e. index ``a * dim_b + b``.

Matrix functions go through the eigendecomposition of the symmetrized input.
Inverses and logarithms act on the support only, with support membership
decided by ``Tolerances.support``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from rsp_lab.config import Tolerances, resolve
from rsp_lab.errors import (
    DimMismatch,
    NotHermitian,
    NotNormalized,
    NotPSD,
    NotSquare,
    NotUnitTrace,
    NumericalFailure,
    ReducedStateMismatch,
    ValidationError,
)

_PHASE_CUTOFF = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate ``vec`` so its first non-negligible component is real positive."""
    vec = np.asarray(vec, dtype=complex)
    mags = np.abs(vec)
    if mags.size == 0 or mags.max() == 0.0:
        return vec.copy()
    idx = int(np.argmax(mags > _PHASE_CUTOFF * mags.max()))
    return vec * (np.conj(vec[idx]) / mags[idx])


def eigh_desc(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Columns of the returned eigenvector matrix carry the deterministic phase
    convention of :func:`fix_phase`.
    """
    h = np.asarray(h, dtype=complex)
    vals, vecs = np.linalg.eigh((h + h.conj().T) / 2)
    order = np.argsort(vals, kind="stable")[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        vecs[:, j] = fix_phase(vecs[:, j])
    return vals, vecs


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated quantum state. Build with :func:`validate_density`."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues descending, eigenvectors as columns)."""
        return eigh_desc(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum[0]

    def support_projector(self, tol: Tolerances | None = None) -> np.ndarray:
        vals, vecs = self.spectrum
        keep = vecs[:, vals > resolve(tol).support]
        return keep @ keep.conj().T

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, eigenvalues={np.round(self.eigenvalues, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(_frozen(np.outer(v, v.conj())))


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """Pure state on Alice (x) Bob, Alice factor first."""

    dim_a: int
    dim_b: int
    amplitudes: np.ndarray = field(repr=False)

    @property
    def state(self) -> PureState:
        return PureState(self.amplitudes)

    def coefficient_matrix(self) -> np.ndarray:
        """``M`` with ``|psi> = sum_ab M[a, b] |a>|b>``."""
        return np.asarray(self.amplitudes).reshape(self.dim_a, self.dim_b)

    def apply_alice(self, u: np.ndarray) -> "BipartiteState":
        return bipartite(u @ self.coefficient_matrix())


def pure_state(amplitudes, tol: Tolerances | None = None) -> PureState:
    tol = resolve(tol)
    v = np.asarray(amplitudes, dtype=complex).ravel()
    if not np.all(np.isfinite(v)):
        raise ValidationError("amplitudes must be finite", invariant="Finite")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > tol.norm:
        raise NotNormalized(f"state norm {norm:.3e} differs from 1", violation=abs(norm - 1.0))
    return PureState(_frozen(v / norm))


def bipartite(coefficients, tol: Tolerances | None = None) -> BipartiteState:
    """Bipartite pure state from its ``dim_a x dim_b`` coefficient matrix."""
    m = np.asarray(coefficients, dtype=complex)
    if m.ndim != 2:
        raise DimMismatch(f"coefficient matrix must be 2-D, got shape {m.shape}")
    psi = pure_state(m.ravel(), tol)
    return BipartiteState(m.shape[0], m.shape[1], psi.amplitudes)


def ket(*amplitudes) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=complex)
    return v / np.linalg.norm(v)


def projector(vec) -> DensityMatrix:
    v = ket(*np.asarray(vec, dtype=complex).ravel())
    return DensityMatrix(_frozen(np.outer(v, v.conj())))


def validate_density(m, tol: Tolerances | None = None) -> DensityMatrix:
    """Check the density-matrix invariants and return a symmetrized, trace-one copy.

    Raises the appropriate :class:`ValidationError` subclass naming the
    violated invariant and the measured violation.
    """
    if isinstance(m, DensityMatrix):
        return m
    tol = resolve(tol)
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise NotSquare(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix entries must be finite", invariant="Finite")
    herm = float(np.max(np.abs(a - a.conj().T)))
    if herm > tol.hermitian:
        raise NotHermitian(f"max |M - M^dagger| = {herm:.3e}", violation=herm)
    a = (a + a.conj().T) / 2
    tr = float(np.trace(a).real)
    if abs(tr - 1.0) > tol.trace:
        raise NotUnitTrace(f"trace = {tr:.12g}", violation=abs(tr - 1.0))
    lam_min = float(np.linalg.eigvalsh(a)[0])
    if lam_min < -tol.psd:
        raise NotPSD(f"smallest eigenvalue = {lam_min:.3e}", violation=-lam_min)
    return DensityMatrix(_frozen(a / tr))


def as_density(obj, tol: Tolerances | None = None) -> DensityMatrix:
    return obj if isinstance(obj, DensityMatrix) else validate_density(obj, tol)


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(_frozen(np.eye(dim) / dim))


def mix(weights, states) -> DensityMatrix:
    """Convex combination of states; weights are renormalized."""
    w = np.asarray(weights, dtype=float)
    mats = [as_density(s).matrix for s in states]
    total = np.tensordot(w, np.stack(mats), axes=1) / w.sum()
    return validate_density(total)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random state from the induced (Ginibre) measure."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return validate_density(rho / np.trace(rho).real)


def _check_dims(rho: DensityMatrix, sigma: DensityMatrix) -> None:
    if rho.dim != sigma.dim:
        raise DimMismatch(f"dimensions differ: {rho.dim} vs {sigma.dim}")


def matrix_sqrt(rho: DensityMatrix) -> np.ndarray:
    vals, vecs = rho.spectrum
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """Square-root fidelity, computed as the nuclear norm of ``sqrt(rho) sqrt(sigma)``."""
    rho, sigma = as_density(rho), as_density(sigma)
    _check_dims(rho, sigma)
    s = np.linalg.svd(matrix_sqrt(rho) @ matrix_sqrt(sigma), compute_uv=False)
    return float(min(max(s.sum(), 0.0), 1.0))


def trace_distance(rho, sigma) -> float:
    rho, sigma = as_density(rho), as_density(sigma)
    _check_dims(rho, sigma)
    diff = rho.matrix - sigma.matrix
    vals = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return float(min(0.5 * np.abs(vals).sum(), 1.0))


def shannon_entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(max(-(p * np.log2(p)).sum(), 0.0))


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def von_neumann_entropy(rho) -> float:
    vals = np.clip(as_density(rho).eigenvalues, 0.0, None)
    return shannon_entropy(vals)


def log2_on_support(sigma: DensityMatrix, tol: Tolerances | None = None) -> np.ndarray:
    """log2(sigma) restricted to its support (zero on the kernel)."""
    vals, vecs = sigma.spectrum
    keep = vals > resolve(tol).support
    v = vecs[:, keep]
    return (v * np.log2(vals[keep])) @ v.conj().T


def support_contained(rho, sigma, tol: Tolerances | None = None) -> bool:
    """True unless some eigenvector of ``rho`` leaks into the kernel of ``sigma``."""
    tol = resolve(tol)
    rho, sigma = as_density(rho, tol), as_density(sigma, tol)
    s_vals, s_vecs = sigma.spectrum
    kernel = s_vecs[:, s_vals <= tol.support]
    if kernel.shape[1] == 0:
        return True
    r_vals, r_vecs = rho.spectrum
    active = r_vecs[:, r_vals > tol.support]
    leak = np.sum(np.abs(kernel.conj().T @ active) ** 2, axis=0)
    return not bool(np.any(leak > tol.support))


def relative_entropy(rho, sigma, tol: Tolerances | None = None) -> float:
    """S(rho || sigma) in bits; ``inf`` when supp(rho) is not inside supp(sigma)."""
    tol = resolve(tol)
    rho, sigma = as_density(rho, tol), as_density(sigma, tol)
    _check_dims(rho, sigma)
    if not support_contained(rho, sigma, tol):
        return float("inf")
    cross = float(np.real(np.trace(rho.matrix @ log2_on_support(sigma, tol))))
    value = -von_neumann_entropy(rho) - cross
    return value if value > 0.0 else 0.0


def purify(rho, tol: Tolerances | None = None) -> BipartiteState:
    """Canonical purification ``sum_i sqrt(lambda_i) |i>_A |v_i>_B``.

    Eigenvalues are taken in descending order; the purifying (Alice) factor
    has the same dimension as ``rho``.
    """
    rho = as_density(rho, tol)
    vals, vecs = rho.spectrum
    coeffs = np.sqrt(np.clip(vals, 0.0, None))[:, None] * vecs.T
    return BipartiteState(rho.dim, rho.dim, _frozen(coeffs.ravel() / np.linalg.norm(coeffs)))


def partial_trace(state, keep: str, dims: tuple[int, int] | None = None) -> DensityMatrix:
    """Reduced state of Alice (``keep="A"``) or Bob (``keep="B"``).

    ``state`` is a :class:`BipartiteState` or a ``dim_a*dim_b`` square
    density matrix, in which case ``dims`` must be given.
    """
    if keep not in ("A", "B"):
        raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
    if isinstance(state, BipartiteState):
        m = state.coefficient_matrix()
        out = m @ m.conj().T if keep == "A" else m.T @ m.conj()
        return validate_density(out)
    if dims is None:
        raise DimMismatch("dims=(dim_a, dim_b) is required for a density-matrix input")
    da, db = dims
    a = np.asarray(state.matrix if isinstance(state, DensityMatrix) else state, dtype=complex)
    if a.shape != (da * db, da * db):
        raise DimMismatch(f"matrix of shape {a.shape} does not factor as {da}x{db}")
    t = a.reshape(da, db, da, db)
    out = np.einsum("abcb->ac", t) if keep == "A" else np.einsum("abad->bd", t)
    return validate_density(out)


def pad_alice(state: BipartiteState, dim_a: int) -> BipartiteState:
    """Embed the Alice factor into a larger space, ancilla levels start at zero amplitude."""
    if dim_a < state.dim_a:
        raise DimMismatch(f"cannot pad Alice dim {state.dim_a} down to {dim_a}")
    m = np.zeros((dim_a, state.dim_b), dtype=complex)
    m[: state.dim_a] = state.coefficient_matrix()
    return BipartiteState(dim_a, state.dim_b, _frozen(m.ravel()))


def overlap(phi: BipartiteState, psi: BipartiteState) -> complex:
    """<phi|psi>."""
    return complex(np.vdot(phi.amplitudes, psi.amplitudes))


def aligning_unitary(phi1: BipartiteState, phi2: BipartiteState) -> np.ndarray:
    """Alice unitary maximizing ``Re <phi2|(U (x) I)|phi1>``.

    With ``|phi_i> <-> M_i`` this is the polar factor of ``M_2 M_1^dagger``:
    if ``M_1 M_2^dagger = P S Q^dagger`` then ``U = Q P^dagger`` and the overlap
    equals ``Tr S``, the fidelity of the two Bob marginals. Degenerate and
    null singular blocks are covered by the full SVD.
    """
    if phi1.dim_a != phi2.dim_a or phi1.dim_b != phi2.dim_b:
        raise DimMismatch(
            f"factor dims differ: ({phi1.dim_a},{phi1.dim_b}) vs ({phi2.dim_a},{phi2.dim_b})"
        )
    m1, m2 = phi1.coefficient_matrix(), phi2.coefficient_matrix()
    p, _, qh = np.linalg.svd(m1 @ m2.conj().T)
    return qh.conj().T @ p.conj().T


def uhlmann_unitary(phi1: BipartiteState, phi2: BipartiteState, tol: Tolerances | None = None) -> np.ndarray:
    """Local unitary on Alice with ``(U (x) I)|phi1> = |phi2>`` up to global phase.

    Both states must have the same Bob marginal; pad the smaller Alice factor
    with :func:`pad_alice` first if the Alice dimensions differ.
    """
    tol = resolve(tol)
    rho1, rho2 = partial_trace(phi1, "B"), partial_trace(phi2, "B")
    gap = float(np.max(np.abs(rho1.matrix - rho2.matrix))) if rho1.dim == rho2.dim else np.inf
    if phi1.dim_b != phi2.dim_b or gap > tol.state:
        raise ReducedStateMismatch(f"Bob marginals differ by {gap:.3e} (tolerance {tol.state:g})")
    u = aligning_unitary(phi1, phi2)
    unitarity = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    residual = transition_residual(u, phi1, phi2)
    if unitarity > tol.unitary or residual > tol.state:
        raise NumericalFailure(
            f"Uhlmann unitary failed verification: unitarity {unitarity:.2e}, residual {residual:.2e}"
        )
    return u


def transition_residual(u: np.ndarray, phi1: BipartiteState, phi2: BipartiteState) -> float:
    """min over global phase of ``|| (U (x) I)|phi1> - e^{i a}|phi2> ||``."""
    mapped = phi1.apply_alice(u) if u.shape[0] == phi1.dim_a else None
    if mapped is None:
        raise DimMismatch("unitary does not act on Alice's factor")
    ov = overlap(phi2, mapped)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(mapped.amplitudes - phase * phi2.amplitudes))


class OperatorLeq(NamedTuple):
    holds: bool
    min_eigenvalue: float
    witness: np.ndarray


def operator_leq(a, b, tol: float = 1e-9) -> OperatorLeq:
    """Decide ``a <= b`` in the Loewner order.

    The witness is the smallest eigenvalue of ``b - a`` with its eigenvector.
    """
    a = np.asarray(a.matrix if isinstance(a, DensityMatrix) else a, dtype=complex)
    b = np.asarray(b.matrix if isinstance(b, DensityMatrix) else b, dtype=complex)
    if a.shape != b.shape:
        raise DimMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    diff = b - a
    vals, vecs = np.linalg.eigh((diff + diff.conj().T) / 2)
    return OperatorLeq(bool(vals[0] >= -tol), float(vals[0]), fix_phase(vecs[:, 0]))
