"""Maximum possible information T(E) = max_mu I_mu(E) and its certificates.

The solver is the classical-quantum Blahut-Arimoto iteration

    mu_{t+1}(x) ~ mu_t(x) * 2 ** S(rho_x || rho_{mu_t}),

started from the uniform distribution, with a periodic Newton step on the
current support (accepted only when it increases ``I_mu``) so that nearly
flat optima do not stall the iteration. At every iterate, ``I_mu`` is a lower
bound on T(E) and ``max_x S(rho_x || rho_mu)`` an upper bound (the divergence
radius), so their difference is a duality-gap certificate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from rsp_lab import qmath
from rsp_lab.config import Tolerances, resolve
from rsp_lab.ensemble import Distribution, Encoding, _check_index, average_state
from rsp_lab.errors import IndexMismatch, MaxIterExceeded, NumericalFailure, TooManyStates

log = logging.getLogger(__name__)

_HOLEVO_CROSSCHECK = 1e-7
_MONOTONE_SLACK = 1e-12
# Newton polish on the current support, tried periodically once the plain
# iteration has had time to identify the support; kept only if I_mu improves.
_NEWTON_START = 100
_NEWTON_EVERY = 25
_NEWTON_SUPPORT = 1e-9


def _newton_candidate(stack, w, d, avg, support_tol):
    """One projected Newton step for max I_mu on {x: w_x > 0}, or None.

    Hessian of I_mu is -tr(rho_x Dlog2(rho_mu)[rho_y]); in the eigenbasis of
    rho_mu the Frechet derivative of log is entrywise multiplication by the
    divided differences of log.
    """
    active = np.flatnonzero(w > _NEWTON_SUPPORT * w.max())
    if active.size < 2:
        return None
    vals, vecs = avg.spectrum
    keep = vals > support_tol
    lam, u = vals[keep], vecs[:, keep]
    a = np.einsum("ia,xij,jb->xab", u.conj(), stack[active], u)
    diff = lam[:, None] - lam[None, :]
    same = np.abs(diff) <= 1e-12 * np.maximum(lam[:, None], lam[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        div = np.where(same, 1.0 / lam[:, None], (np.log(lam)[:, None] - np.log(lam)[None, :]) / diff)
    hess = -np.einsum("xab,yba,ab->xy", a, a, div).real / math.log(2)
    m = active.size
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = hess
    kkt[:m, m] = kkt[m, :m] = 1.0
    rhs = np.concatenate([-d[active], [0.0]])
    step = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:m]
    if not np.all(np.isfinite(step)):
        return None
    wa = w[active]
    # largest feasible fraction of the step, stopping short of the boundary
    shrink = step < 0
    t = min(1.0, 0.99 * float(np.min(-wa[shrink] / step[shrink]))) if shrink.any() else 1.0
    cand = np.zeros_like(w)
    cand[active] = np.maximum(wa + t * step, 0.0)
    total = cand.sum()
    return cand / total if total > 0 else None


@dataclass(frozen=True, eq=False)
class CapacityResult:
    mu_star: Distribution
    value: float
    gap: float
    iterations: int
    per_x_divergence: dict[str, float]
    converged: bool = True
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def upper_bound(self) -> float:
        return self.value + max(self.gap, 0.0)


def holevo_information(e: Encoding, mu: Distribution, tol: Tolerances | None = None) -> float:
    """I_mu(E) = sum_x p_x S(rho_x || rho_mu), in bits.

    Cross-checked against ``S(rho_mu) - sum_x p_x S(rho_x)``.
    """
    tol = resolve(tol)
    _check_index(e, mu)
    avg = average_state(e, mu)
    total = 0.0
    for p, rho in zip(mu.weights, e.states):
        if p > 0.0:
            total += p * qmath.relative_entropy(rho, avg, tol)
    entropic = qmath.von_neumann_entropy(avg) - sum(
        p * qmath.von_neumann_entropy(rho) for p, rho in zip(mu.weights, e.states))
    if not abs(total - entropic) <= _HOLEVO_CROSSCHECK:
        raise NumericalFailure(
            f"Holevo forms disagree: divergence form {total!r}, entropy form {entropic!r}")
    return max(total, 0.0)


def divergences(e: Encoding, mu: Distribution, tol: Tolerances | None = None) -> dict[str, float]:
    """S(rho_x || rho_mu) for every label (possibly ``inf``)."""
    avg = average_state(e, mu)
    return {l: qmath.relative_entropy(rho, avg, tol) for l, rho in e.items()}


def solve_capacity(
    e: Encoding,
    tol_capacity: float | None = None,
    max_iter: int = 100_000,
    *,
    tol: Tolerances | None = None,
    raise_on_max_iter: bool = True,
    keep_history: bool = False,
) -> CapacityResult:
    """Blahut-Arimoto for T(E).

    Stops once ``max_x S(rho_x||rho_mu) - I_mu <= tol_capacity``. Raises
    :class:`MaxIterExceeded` (carrying the best iterate) if ``max_iter`` is
    reached first, unless ``raise_on_max_iter`` is false, in which case the
    result comes back with ``converged=False``.
    """
    tol = resolve(tol)
    eps = tol.capacity if tol_capacity is None else tol_capacity
    stack = np.stack([s.matrix for s in e.states])
    neg_entropy = -np.array([qmath.von_neumann_entropy(s) for s in e.states])
    w = np.full(len(e), 1.0 / len(e))
    history = []
    prev = -math.inf
    it = 0
    converged = False

    def evaluate(w):
        avg = qmath.validate_density(np.tensordot(w, stack, axes=1), tol)
        log_avg = qmath.log2_on_support(avg, tol)
        # fixed reduction order: einsum over a contiguous stack
        d = np.maximum(neg_entropy - np.einsum("xij,ji->x", stack, log_avg).real, 0.0)
        return avg, d, float(np.dot(w, d))

    avg, d, info = evaluate(w)
    while True:
        gap = float(d.max() - info)
        if info < prev - _MONOTONE_SLACK:
            raise NumericalFailure(f"capacity iteration lost monotonicity at step {it}: {info!r} < {prev!r}")
        prev = info
        if keep_history:
            history.append(info)
        if gap <= eps:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        if it >= _NEWTON_START and it % _NEWTON_EVERY == 0:
            cand = _newton_candidate(stack, w, d, avg, tol.support)
            if cand is not None:
                c_avg, c_d, c_info = evaluate(cand)
                if c_info > info:
                    w, avg, d, info = cand, c_avg, c_d, c_info
                    continue
        w = w * np.exp2(d - d.max())
        w /= w.sum()
        avg, d, info = evaluate(w)
    mu = Distribution.from_weights(e.labels, w)
    per_x = divergences(e, mu, tol)
    value = holevo_information(e, mu, tol)
    result = CapacityResult(
        mu_star=mu,
        value=value,
        gap=max(per_x.values()) - value,
        iterations=it,
        per_x_divergence=per_x,
        converged=converged,
        history=tuple(history),
    )
    if not converged:
        msg = f"no convergence after {max_iter} iterations (gap {gap:.3e} > {eps:g})"
        if raise_on_max_iter:
            raise MaxIterExceeded(msg, result)
        log.warning(msg)
    if not 0.0 <= value <= math.log2(e.dim) + 1e-9:
        raise NumericalFailure(f"capacity {value!r} outside [0, log2 d]")
    return result


def minimax_distribution(e: Encoding, tol: float = 1e-6, **solver_kw) -> tuple[Distribution, float]:
    """A distribution mu with S(rho_x || rho_mu) <= T(E) for every x.

    Realized by the capacity-achieving distribution; the bound is checked
    against the returned value with slack ``tol``.
    """
    res = solve_capacity(e, **solver_kw)
    worst = max(res.per_x_divergence.values())
    if worst > res.value + tol:
        raise NumericalFailure(f"divergence bound fails: max_x S = {worst!r} > T + tol = {res.value + tol!r}")
    return res.mu_star, res.value


def entropy_continuity_bound(t: float, dim: int) -> float:
    """Upper bound on |S(rho) - S(sigma)| for states at trace distance t.

    Audenaert's form ``t log2(d-1) + H2(t)``, with H2 capped at one bit once
    t passes 1/2, which keeps it valid for every t in [0, 1].
    """
    t = min(max(t, 0.0), 1.0)
    return t * math.log2(max(dim - 1, 1)) + qmath.binary_entropy(min(t, 0.5))


class BruteForceResult(NamedTuple):
    value: float
    slack: float
    mu: Distribution
    points: int


def brute_force_capacity(e: Encoding, grid_step: float = 0.01, exhaustive: bool = False) -> BruteForceResult:
    """Grid search of the Holevo quantity over the probability simplex (|X| <= 4).

    ``value`` is the grid maximum, hence a lower bound on T(E); ``slack``
    bounds how far T(E) can lie above it. Every prior is within l1 distance
    ``|X| * grid_step`` of a grid point, so the average states are within
    trace distance ``|X| * grid_step / 2``, and the slack follows from
    entropy continuity plus the linear term.
    """
    from rsp_lab import _grid  # compiled kernel; imported lazily

    m = len(e)
    if m > 4:
        raise TooManyStates(f"brute force supports at most 4 states, got {m}")
    if not 0.0 < grid_step <= 0.1:
        raise ValueError(f"grid_step must lie in (0, 0.1], got {grid_step}")
    big_n = round(1.0 / grid_step)
    if abs(big_n * grid_step - 1.0) > 1e-9:
        raise ValueError(f"1/grid_step must be an integer, got {1.0 / grid_step!r}")
    ent = np.array([qmath.von_neumann_entropy(s) for s in e.states])
    value, counts = _grid.scan(np.stack([s.matrix for s in e.states]), ent, big_n, exhaustive=exhaustive)
    t = m * grid_step / 2
    slack = entropy_continuity_bound(t, e.dim) + t * float(ent.max() - ent.min())
    points = math.comb(big_n + m - 1, m - 1)
    mu = Distribution.from_weights(e.labels, counts / big_n)
    return BruteForceResult(max(value, 0.0), slack, mu, points)


def fannes_bound(e: Encoding, e_prime: Encoding) -> float:
    """Certified bound on |T(E) - T(E')| for encodings over the same labels.

    With t the largest per-item trace distance, every I_mu moves by at most
    one continuity term for S(rho_mu) plus the average of the per-item terms,
    hence by at most twice the continuity bound at t.
    """
    if tuple(e.labels) != tuple(e_prime.labels):
        raise IndexMismatch(f"label sets differ: {list(e.labels)} vs {list(e_prime.labels)}")
    if e.dim != e_prime.dim:
        raise IndexMismatch(f"dimensions differ: {e.dim} vs {e_prime.dim}")
    t = max(qmath.trace_distance(a, b) for a, b in zip(e.states, e_prime.states))
    if t == 0.0:
        return 0.0
    return 2.0 * entropy_continuity_bound(t, e.dim)
