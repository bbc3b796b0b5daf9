"""Substate decompositions of a purification of rho_mu.

For a pair (rho_x, rho_mu) and r > 1 this builds

    |sigma_bar> = sqrt(p) |phi>|1> + sqrt(1 - p) |theta>|0>,

a purification of rho_mu whose flagged branch |phi> has a Bob marginal close
to rho_x. The construction is a relative-operator truncation: keep the part
of V = rho_mu^{-1/2} rho_x rho_mu^{-1/2} with eigenvalues at most t, which
yields tau <= t * rho_mu and therefore room for p * tau_hat inside rho_mu.

``mode="paper"`` uses k = 8 S(rho_x||rho_mu) + 14, t = 2^{rk} and
p = (r - 1) / (r 2^{rk}). ``mode="tight"`` searches the smallest threshold
meeting the fidelity and weight requirements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from rsp_lab import qmath
from rsp_lab.config import Tolerances, resolve
from rsp_lab.errors import CertificateInfeasible, NumericalFailure, SupportViolation, ZeroWeight
from rsp_lab.qmath import BipartiteState, DensityMatrix

MODES = ("paper", "tight")
TIGHT_BISECTION_STEPS = 60
# eigenvalues of V within this relative margin of the threshold count as kept
KEEP_MARGIN = 1e-12
# slack on the fidelity clause only; covers round-off in F itself
FIDELITY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class SubstateCertificate:
    r: float
    k: float
    p: float
    log2_p: float
    log2_threshold: float
    phi: BipartiteState
    theta: BipartiteState
    sigma_bar: BipartiteState
    weight_w: float
    fidelity_phi: float
    mode: str
    divergence: float

    @property
    def threshold(self) -> float:
        return 2.0 ** self.log2_threshold

    @cached_property
    def phi_marginal(self) -> DensityMatrix:
        return qmath.partial_trace(self.phi, "B")

    @property
    def fidelity_floor(self) -> float:
        return 1.0 - 1.0 / math.sqrt(self.r)


def _relative_operator(rho_x: DensityMatrix, rho_mu: DensityMatrix, tol: Tolerances):
    vals, vecs = rho_mu.spectrum
    keep = vals > tol.support
    v = vecs[:, keep]
    inv_sqrt = (v / np.sqrt(vals[keep])) @ v.conj().T
    sqrt_mu = qmath.matrix_sqrt(rho_mu)
    rel = inv_sqrt @ rho_x.matrix @ inv_sqrt
    lam, w = qmath.eigh_desc(rel)
    return sqrt_mu, lam, w


def _truncate(sqrt_mu, lam, w, log2_t: float):
    t = 2.0 ** log2_t if log2_t < 1000 else math.inf
    kept = lam <= t * (1.0 + KEEP_MARGIN)
    core = (w[:, kept] * np.clip(lam[kept], 0.0, None)) @ w[:, kept].conj().T
    tau = sqrt_mu @ core @ sqrt_mu
    tau = (tau + tau.conj().T) / 2
    return tau, float(np.trace(tau).real)


def relative_truncation(rho_x, rho_mu, threshold_t: float | None = None, *, log2_threshold: float | None = None,
                        tol: Tolerances | None = None) -> tuple[DensityMatrix, float]:
    """Keep the part of rho_x whose relative eigenvalues against rho_mu are at most t.

    Returns ``(tau_hat, w)`` with ``w = Tr tau`` and ``tau_hat = tau / w``, so
    that ``tau_hat <= (t / w) rho_mu``. The threshold may be given through its
    base-2 logarithm for thresholds beyond float range.
    """
    tol = resolve(tol)
    rho_x, rho_mu = qmath.as_density(rho_x, tol), qmath.as_density(rho_mu, tol)
    log2_t = log2_threshold if log2_threshold is not None else math.log2(threshold_t)
    if log2_t < 0:
        raise ValueError(f"threshold must be >= 1, got 2**{log2_t}")
    if not qmath.support_contained(rho_x, rho_mu, tol):
        raise SupportViolation("supp(rho_x) is not contained in supp(rho_mu): divergence is infinite")
    tau, w = _truncate(*_relative_operator(rho_x, rho_mu, tol), log2_t)
    if w <= tol.support:
        raise ZeroWeight(f"truncation at threshold 2**{log2_t:.6g} keeps weight {w:.3e}")
    return qmath.validate_density(tau / w, tol), w


def _tight_threshold(rho_x, parts, r: float, log2_max: float) -> float:
    floor = 1.0 - 1.0 / math.sqrt(r)
    need_w = (r - 1.0) / r

    def ok(log2_t):
        tau, w = _truncate(*parts, log2_t)
        if w < need_w:
            return False
        return qmath.fidelity(DensityMatrix(tau / w), rho_x) >= floor

    if ok(0.0):
        return 0.0
    if not ok(log2_max):
        raise CertificateInfeasible(
            "no threshold up to 2**(rk) meets the fidelity and weight requirements",
            {"log2_threshold_max": log2_max, "r": r},
        )
    lo, hi = 0.0, log2_max
    for _ in range(TIGHT_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def substate_decompose(rho_x, rho_mu, r: float, mode: str = "tight",
                       tol: Tolerances | None = None) -> SubstateCertificate:
    tol = resolve(tol)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r}")
    rho_x, rho_mu = qmath.as_density(rho_x, tol), qmath.as_density(rho_mu, tol)
    s = qmath.relative_entropy(rho_x, rho_mu, tol)
    if math.isinf(s):
        raise SupportViolation("supp(rho_x) is not contained in supp(rho_mu): divergence is infinite")
    k = 8.0 * s + 14.0
    rk = r * k
    parts = _relative_operator(rho_x, rho_mu, tol)

    if mode == "paper":
        log2_t = rk
        log2_p = math.log2((r - 1.0) / r) - rk
        tau, w = _truncate(*parts, log2_t)
        if w < (r - 1.0) / r:
            raise CertificateInfeasible(
                f"paper constants leave truncation weight {w:.6g} < (r-1)/r = {(r - 1) / r:.6g}",
                {"weight_w": w, "r": r, "k": k, "log2_threshold": log2_t},
            )
    else:
        log2_t = _tight_threshold(rho_x, parts, r, rk)
        tau, w = _truncate(*parts, log2_t)
        log2_p = math.log2((r - 1.0) * w / r) - log2_t
    if w <= tol.support:
        raise ZeroWeight(f"truncation weight {w:.3e}")
    p = 2.0 ** log2_p
    tau_hat = qmath.validate_density(tau / w, tol)
    fid = qmath.fidelity(tau_hat, rho_x)
    if mode == "paper" and fid < 1.0 - 1.0 / math.sqrt(r) - FIDELITY_SLACK:
        raise CertificateInfeasible(
            f"paper constants give fidelity {fid:.6g} below 1 - 1/sqrt(r)",
            {"fidelity_phi": fid, "r": r, "k": k},
        )

    # Alice factor of phi aligned with the canonical purification of rho_x
    target = qmath.purify(rho_x, tol)
    raw = qmath.purify(tau_hat, tol)
    phi = raw.apply_alice(qmath.aligning_unitary(raw, target))

    rem = (rho_mu.matrix - p * tau_hat.matrix) / (1.0 - p)
    theta = qmath.purify(qmath.validate_density(rem, tol), tol)
    dim_a = max(phi.dim_a, theta.dim_a)
    phi, theta = qmath.pad_alice(phi, dim_a), qmath.pad_alice(theta, dim_a)
    sigma_bar = assemble_sigma_bar(phi, theta, p)

    cert = SubstateCertificate(
        r=float(r), k=k, p=p, log2_p=log2_p, log2_threshold=log2_t, phi=phi, theta=theta,
        sigma_bar=sigma_bar, weight_w=w, fidelity_phi=fid, mode=mode, divergence=s,
    )
    report = verify_certificate(cert, rho_x, rho_mu, tol)
    if not report.passed:
        raise NumericalFailure(f"certificate verification failed: {report.failures()}")
    return cert


def assemble_sigma_bar(phi: BipartiteState, theta: BipartiteState, p: float) -> BipartiteState:
    """sqrt(p)|phi>|1> + sqrt(1-p)|theta>|0>; the flag qubit joins Alice's factor as its last index."""
    out = np.zeros((phi.dim_a, 2, phi.dim_b), dtype=complex)
    out[:, 1, :] = math.sqrt(p) * phi.coefficient_matrix()
    out[:, 0, :] = math.sqrt(1.0 - p) * theta.coefficient_matrix()
    return qmath.bipartite(out.reshape(2 * phi.dim_a, phi.dim_b))


def flag_probability(sigma_bar: BipartiteState) -> float:
    """Probability that measuring the flag qubit of sigma_bar gives 1."""
    m = sigma_bar.coefficient_matrix().reshape(sigma_bar.dim_a // 2, 2, sigma_bar.dim_b)
    return float(np.sum(np.abs(m[:, 1, :]) ** 2))


@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    measured: float
    required: float


@dataclass(frozen=True)
class VerificationReport:
    clauses: tuple[Clause, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def __getitem__(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [f"{c.name}: measured {c.measured:.6g}, required {c.required:.6g}" for c in self.clauses if not c.passed]


def verify_certificate(c: SubstateCertificate, rho_x, rho_mu, tol: Tolerances | None = None) -> VerificationReport:
    """Recheck every clause of a certificate from its stored states.

    Clauses: ``operator_inequality`` (min eigenvalue of rho_mu - p phi_B),
    ``purifies_rho_mu`` (spectral norm of Bob(sigma_bar) - rho_mu),
    ``fidelity_marginal`` and ``fidelity_purification`` (against
    1 - 1/sqrt(r)), ``flag_amplitude_one``/``flag_amplitude_zero`` (flag
    branch norms vs sqrt(p), sqrt(1-p)) and, in paper mode, ``paper_k`` and
    ``paper_p`` for the formulas themselves.
    """
    tol = resolve(tol)
    rho_x, rho_mu = qmath.as_density(rho_x, tol), qmath.as_density(rho_mu, tol)
    clauses = []
    phi_b = qmath.partial_trace(c.phi, "B").matrix
    leq = qmath.operator_leq(c.p * phi_b, rho_mu.matrix, tol.psd)
    clauses.append(Clause("operator_inequality", leq.holds, leq.min_eigenvalue, -tol.psd))

    bob = qmath.partial_trace(c.sigma_bar, "B").matrix
    dist = float(np.linalg.norm(bob - rho_mu.matrix, 2))
    clauses.append(Clause("purifies_rho_mu", dist <= tol.state, dist, tol.state))

    floor = 1.0 - 1.0 / math.sqrt(c.r)
    f_marg = qmath.fidelity(DensityMatrix(phi_b), rho_x)
    clauses.append(Clause("fidelity_marginal", f_marg >= floor - FIDELITY_SLACK, f_marg, floor))
    target = qmath.pad_alice(qmath.purify(rho_x, tol), c.phi.dim_a)
    f_pure = abs(qmath.overlap(target, c.phi))
    clauses.append(Clause("fidelity_purification", f_pure >= floor - FIDELITY_SLACK, f_pure, floor))

    m = c.sigma_bar.coefficient_matrix().reshape(c.sigma_bar.dim_a // 2, 2, c.sigma_bar.dim_b)
    a1 = float(np.linalg.norm(m[:, 1, :]))
    a0 = float(np.linalg.norm(m[:, 0, :]))
    clauses.append(Clause("flag_amplitude_one", abs(a1 - math.sqrt(c.p)) <= tol.state, a1, math.sqrt(c.p)))
    clauses.append(Clause("flag_amplitude_zero", abs(a0 - math.sqrt(1.0 - c.p)) <= tol.state, a0,
                          math.sqrt(1.0 - c.p)))

    if c.mode == "paper":
        s = qmath.relative_entropy(rho_x, rho_mu, tol)
        k = 8.0 * s + 14.0
        clauses.append(Clause("paper_k", abs(c.k - k) <= 1e-9 * max(1.0, k), c.k, k))
        log2_p = math.log2((c.r - 1.0) / c.r) - c.r * k
        clauses.append(Clause("paper_p", abs(c.log2_p - log2_p) <= 1e-9 * max(1.0, abs(log2_p)), c.log2_p, log2_p))
    return VerificationReport(tuple(clauses))
