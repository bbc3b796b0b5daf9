"""The substate-based remote state preparation protocol.

Alice and Bob share N copies of a purification |psi> of rho_mu*, Bob holding
the rho_mu* halves. On input x Alice rotates every copy to the substate
purification |sigma_bar_x> (a local unitary on her side), measures the flag
qubits and sends the index of the first copy showing 1. Bob keeps that copy.

Communication is the classical index message only; entanglement is free.
Success probabilities are evaluated in the log domain because in the paper
policy N = 2^{ceil(rk)} is astronomically large and p astronomically small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rsp_lab import capacity, qmath
from rsp_lab.accounting import ceil_log2, ceil_tol, robust_copies, sample_first_success, success_probability
from rsp_lab.config import Tolerances, resolve
from rsp_lab.ensemble import Distribution, Encoding, average_state
from rsp_lab.errors import SupportViolation, UnknownLabel
from rsp_lab.qmath import DensityMatrix
from rsp_lab.substate import SubstateCertificate, substate_decompose

COPY_POLICIES = ("paper", "robust")
FIDELITY_SLACK = 1e-9


def default_r(epsilon: float) -> float:
    return 4.0 / epsilon ** 2


def paper_rhs(epsilon: float, t: float) -> float:
    """(8 / eps^2)(4 T + 7)."""
    return 8.0 / epsilon ** 2 * (4.0 * t + 7.0)


@dataclass(frozen=True, eq=False)
class PlanItem:
    k: float
    p: float
    log2_p: float
    n_copies: int
    comm_bits: int
    certificate: SubstateCertificate


@dataclass(frozen=True, eq=False)
class ProtocolPlan:
    encoding: Encoding
    epsilon: float
    r: float
    mu_star: Distribution
    T: float
    rho_mu: DensityMatrix
    per_x: dict[str, PlanItem]
    mode: str
    copy_policy: str
    capacity: capacity.CapacityResult = field(repr=False)

    @property
    def comm_bits(self) -> dict[str, int]:
        return {l: item.comm_bits for l, item in self.per_x.items()}

    @property
    def bound_rhs(self) -> float:
        return paper_rhs(self.epsilon, self.T)

    def item(self, x: str) -> PlanItem:
        try:
            return self.per_x[x]
        except KeyError:
            raise UnknownLabel(f"label {x!r} not in plan; labels are {list(self.per_x)}") from None


@dataclass(frozen=True, eq=False)
class ProtocolOutcome:
    label: str
    success_prob: float
    output_state: DensityMatrix
    fidelity: float
    comm_bits_used: int
    mode: str
    seed: int | None = None
    success_copy_index: int | None = None
    succeeded: bool | None = None


def plan(e: Encoding, epsilon: float, mode: str = "tight", copy_policy: str = "robust", *,
         r: float | None = None, tol: Tolerances | None = None,
         capacity_result: capacity.CapacityResult | None = None) -> ProtocolPlan:
    """Build the protocol for every input x.

    ``r`` defaults to 4 / epsilon^2. In the paper copy policy N = 2^{ceil(r k_x)};
    in the robust policy N is the smallest count with (1 - p)^N <= 1/r.
    """
    tol = resolve(tol)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if copy_policy not in COPY_POLICIES:
        raise ValueError(f"copy policy must be one of {COPY_POLICIES}, got {copy_policy!r}")
    r = default_r(epsilon) if r is None else float(r)
    cap = capacity_result or capacity.solve_capacity(e, tol=tol)
    rho_mu = average_state(e, cap.mu_star)
    per_x = {}
    for label, rho in e.items():
        if math.isinf(cap.per_x_divergence[label]):
            raise SupportViolation(f"supp(rho_{label}) is not inside supp(rho_mu*)", label=label)
        cert = substate_decompose(rho, rho_mu, r, mode, tol)
        if copy_policy == "paper":
            n = 1 << ceil_tol(r * cert.k)
        else:
            n = robust_copies(cert.p, r, cert.log2_p)
        per_x[label] = PlanItem(cert.k, cert.p, cert.log2_p, n, ceil_log2(n), cert)
    return ProtocolPlan(e, float(epsilon), r, cap.mu_star, cap.value, rho_mu, per_x, mode, copy_policy, cap)


def _outcome_state(plan_: ProtocolPlan, item: PlanItem, s: float) -> DensityMatrix:
    rho_prime = item.certificate.phi_marginal
    return qmath.validate_density(s * rho_prime.matrix + (1.0 - s) * plan_.rho_mu.matrix)


def run_analytic(plan_: ProtocolPlan, x: str) -> ProtocolOutcome:
    """Exact outcome for input x without materializing any copy.

    On failure Bob outputs his untouched half of copy 1, i.e. rho_mu*,
    and Alice spends one extra message on an abort symbol.
    """
    item = plan_.item(x)
    s = success_probability(item.p, item.n_copies, item.log2_p)
    out = _outcome_state(plan_, item, s)
    rho_x = plan_.encoding[x]
    return ProtocolOutcome(
        label=x, success_prob=s, output_state=out, fidelity=qmath.fidelity(out, rho_x),
        comm_bits_used=ceil_log2(item.n_copies + 1), mode="analytic",
    )


def run_sampled(plan_: ProtocolPlan, x: str, seed: int) -> ProtocolOutcome:
    """One Monte Carlo run of the protocol, deterministic given ``seed``."""
    item = plan_.item(x)
    rng = np.random.default_rng(seed)
    idx = sample_first_success(item.p, item.n_copies, rng, item.log2_p)
    out = item.certificate.phi_marginal if idx is not None else plan_.rho_mu
    return ProtocolOutcome(
        label=x, success_prob=success_probability(item.p, item.n_copies, item.log2_p), output_state=out,
        fidelity=qmath.fidelity(out, plan_.encoding[x]), comm_bits_used=ceil_log2(item.n_copies + 1),
        mode="sampled", seed=seed, success_copy_index=idx, succeeded=idx is not None,
    )


def lower_bound_certificate(e: Encoding, capacity_result: capacity.CapacityResult | None = None) -> float:
    """T(E)/2: any exact protocol must send at least this many qubits."""
    cap = capacity_result or capacity.solve_capacity(e)
    return cap.value / 2.0


@dataclass(frozen=True, eq=False)
class AuditRow:
    label: str
    k: float
    p: float
    log2_p: float
    n_copies: int
    comm_bits: int
    comm_bits_used: int
    fidelity: float
    fidelity_ok: bool
    claimed_success: float
    exact_success: float


@dataclass(frozen=True, eq=False)
class AuditReport:
    T: float
    epsilon: float
    r: float
    mode: str
    copy_policy: str
    lower_bound: float
    upper_bound_rhs: float
    rows: tuple[AuditRow, ...]
    flags: dict[str, bool]
    plan: ProtocolPlan = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    @property
    def success_table(self) -> list[dict]:
        return [{"label": row.label, "claimed": row.claimed_success, "exact": row.exact_success,
                 "log2_p": row.log2_p, "n_copies_log2": math.log2(row.n_copies) if row.n_copies > 0 else 0.0}
                for row in self.rows]


def audit(e: Encoding, epsilon: float, mode: str = "tight", copy_policy: str = "robust", *,
          r: float | None = None, tol: Tolerances | None = None) -> AuditReport:
    """Plan, run every input analytically, and compare against both bounds.

    Flags: ``fidelity`` (F >= 1 - epsilon for all x), ``lower_bound``
    (worst-case index length >= T/2), and in the paper copy policy
    ``upper_bound`` (every index length <= ceil((8/eps^2)(4T + 7))). The
    claimed-vs-exact success probabilities are informational.
    """
    pl = plan(e, epsilon, mode, copy_policy, r=r, tol=tol)
    lower = lower_bound_certificate(e, pl.capacity)
    rhs = pl.bound_rhs
    claimed = 1.0 - 1.0 / pl.r
    rows = []
    for label in e.labels:
        item = pl.per_x[label]
        out = run_analytic(pl, label)
        rows.append(AuditRow(
            label=label, k=item.k, p=item.p, log2_p=item.log2_p, n_copies=item.n_copies,
            comm_bits=item.comm_bits, comm_bits_used=out.comm_bits_used, fidelity=out.fidelity,
            fidelity_ok=bool(out.fidelity >= 1.0 - epsilon - FIDELITY_SLACK),
            claimed_success=claimed, exact_success=out.success_prob,
        ))
    flags = {
        "fidelity": bool(all(row.fidelity_ok for row in rows)),
        "lower_bound": bool(max(row.comm_bits for row in rows) >= lower),
    }
    if copy_policy == "paper":
        flags["upper_bound"] = bool(all(row.comm_bits <= ceil_tol(rhs) for row in rows))
    return AuditReport(pl.T, float(epsilon), pl.r, mode, copy_policy, lower, rhs, tuple(rows), flags, pl)
