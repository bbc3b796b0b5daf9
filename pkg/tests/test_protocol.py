import dataclasses
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import seeds
from rsp_lab import accounting
from rsp_lab.capacity import solve_capacity
from rsp_lab.ensemble import BUILTIN_NAMES, Distribution, builtin
from rsp_lab.errors import SupportViolation, UnknownLabel
from rsp_lab.protocol import (audit, default_r, lower_bound_certificate, paper_rhs, plan, run_analytic,
                              run_sampled)


# -- accounting --------------------------------------------------------------

@pytest.mark.parametrize("n, bits", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (2**352, 352), (2**352 + 1, 353)])
def test_ceil_log2_exact(n, bits):
    assert accounting.ceil_log2(n) == bits


def test_ceil_tol_ignores_noise():
    assert accounting.ceil_tol(352.00000000001) == 352
    assert accounting.ceil_tol(352.001) == 353
    assert accounting.ceil_tol(622.2222222222222) == 623


def _mp_failure(p, n, log2_p=None, prec=2000):
    with mpmath.workprec(prec):
        pm = mpmath.mpf(p) if log2_p is None else mpmath.power(2, mpmath.mpf(log2_p))
        return (1 - pm) ** n


@given(st.floats(1e-6, 0.999), st.integers(1, 10**6))
def test_success_probability_matches_mpmath(p, n):
    assert accounting.success_probability(p, n) == pytest.approx(float(1 - _mp_failure(p, n)), abs=1e-12)


@pytest.mark.parametrize("log2_p", [-60.0, -352.0, -1200.0, -3000.5])
def test_success_probability_underflow(log2_p):
    # p itself may underflow to zero; log2_p carries it
    n = 2 ** math.ceil(-log2_p)
    p = 2.0 ** log2_p
    exact = float(1 - _mp_failure(p, n, log2_p, prec=int(-log2_p) + 200))
    assert accounting.success_probability(p, n, log2_p) == pytest.approx(exact, abs=1e-12)


@given(st.floats(1e-9, 0.99), st.floats(1.5, 1000.0))
def test_robust_copies_minimal(p, r):
    n = accounting.robust_copies(p, r)
    with mpmath.workprec(200):
        assert _mp_failure(p, n, prec=200) <= 1 / mpmath.mpf(r)
        if n > 1:
            assert _mp_failure(p, n - 1, prec=200) > 1 / mpmath.mpf(r)


def test_robust_copies_tiny_p():
    log2_p = -400.0
    n = accounting.robust_copies(0.0, 16, log2_p)
    # (1-p)^N <= 1/16 with p = 2^-400 means N ~ ln(16) 2^400
    assert abs(math.log2(n) - (400 + math.log2(math.log(16)))) < 1e-9
    assert accounting.robust_copies(1.0, 16) == 1


def test_sample_first_success_law():
    rng = np.random.default_rng(1)
    p, n = 0.3, 5
    draws = [accounting.sample_first_success(p, n, rng) for _ in range(20000)]
    for i in range(1, n + 1):
        assert np.mean([d == i for d in draws]) == pytest.approx(p * (1 - p) ** (i - 1), abs=0.012)
    assert np.mean([d is None for d in draws]) == pytest.approx((1 - p) ** n, abs=0.01)


def test_sample_first_success_certain_and_huge():
    rng = np.random.default_rng(0)
    assert all(accounting.sample_first_success(1.0, 10, rng) == 1 for _ in range(50))
    idx = [accounting.sample_first_success(0.0, 2**360, rng, -356.0) for _ in range(200)]
    hits = [i for i in idx if i is not None]
    assert all(1 <= i <= 2**360 for i in hits)
    assert len(hits) > 150  # success prob 1 - e^{-16}


# -- plans -------------------------------------------------------------------

def test_paper_rhs_and_r():
    assert default_r(0.5) == 16.0
    assert paper_rhs(0.5, 1.0) == 352.0


def test_basis2_paper_plan():
    pl = plan(builtin("basis2"), 0.5, "paper", "paper")
    assert pl.r == 16 and pl.T == pytest.approx(1.0)
    for item in pl.per_x.values():
        assert item.k == pytest.approx(22.0)
        assert item.n_copies == 2**352 and item.comm_bits == 352
    assert accounting.ceil_tol(pl.r * 22) == accounting.ceil_tol(pl.bound_rhs) == 352


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5, 0.7])
def test_const2_paper_plan(eps):
    pl = plan(builtin("const2"), eps, "paper", "paper")
    assert pl.T == 0.0
    assert set(pl.comm_bits.values()) == {accounting.ceil_tol(8 / eps**2 * 7)}


def test_tight_robust_is_much_cheaper():
    pl = plan(builtin("basis2"), 0.5)
    assert max(pl.comm_bits.values()) < 10  # regression: 3 bits for N = 5
    for item in pl.per_x.values():
        assert (1 - item.p) ** item.n_copies <= 1 / pl.r
        assert (1 - item.p) ** (item.n_copies - 1) > 1 / pl.r


@pytest.mark.parametrize("name, expected", [("basis2", 0.5), ("const2", 0.0), ("bb84", 0.5)])
def test_lower_bound_certificate(name, expected):
    assert lower_bound_certificate(builtin(name)) == pytest.approx(expected, abs=1e-9)


def test_plan_invariants(builtin_encoding):
    _, e = builtin_encoding
    for mode in ("paper", "tight"):
        for policy in ("paper", "robust"):
            pl = plan(e, 0.5, mode, policy)
            for item in pl.per_x.values():
                assert item.comm_bits == accounting.ceil_log2(item.n_copies)
                if policy == "paper":
                    assert item.n_copies == 2 ** accounting.ceil_tol(pl.r * item.k)


def test_plan_rejects_support_violation():
    e = builtin("basis2")
    res = solve_capacity(e)
    mu = Distribution.point_mass(e.labels, "0")
    fake = dataclasses.replace(res, mu_star=mu, per_x_divergence={"0": 0.0, "1": math.inf})
    with pytest.raises(SupportViolation) as info:
        plan(e, 0.5, capacity_result=fake)
    assert info.value.label == "1"


@pytest.mark.parametrize("kwargs", [dict(epsilon=0.0), dict(epsilon=1.0), dict(epsilon=0.5, copy_policy="x")])
def test_plan_argument_checks(kwargs):
    with pytest.raises(ValueError):
        plan(builtin("basis2"), **kwargs)


# -- runs --------------------------------------------------------------------

def test_const2_fidelity_one_regardless():
    pl = plan(builtin("const2"), 0.3, "paper", "paper")
    for x in pl.per_x:
        assert run_analytic(pl, x).fidelity == pytest.approx(1.0, abs=1e-12)


def test_basis2_tight_outcome():
    pl = plan(builtin("basis2"), 0.5)
    out = run_analytic(pl, "0")
    assert out.fidelity >= 0.5
    # rho_x' = rho_x exactly, so the only loss is the failure branch
    s = out.success_prob
    assert out.fidelity == pytest.approx(math.sqrt(s + (1 - s) / 2), abs=1e-9)
    assert out.comm_bits_used == accounting.ceil_log2(pl.item("0").n_copies + 1)


def test_paper_policy_success_gap():
    pl = plan(builtin("basis2"), 0.5, "paper", "paper")
    out = run_analytic(pl, "0")
    assert out.success_prob == pytest.approx(1 - math.exp(-15 / 16), abs=1e-12)
    assert out.success_prob < 1 - 1 / pl.r


def test_sampled_determinism_and_identity():
    pl = plan(builtin("pair0plus"), 0.5)
    a, b = run_sampled(pl, "+", 42), run_sampled(pl, "+", 42)
    assert (a.success_copy_index, a.fidelity) == (b.success_copy_index, b.fidelity)
    runs = [run_sampled(pl, "+", s) for s in range(200)]
    for o in runs:
        if o.succeeded:
            assert o.output_state is pl.item("+").certificate.phi_marginal
        else:
            assert o.output_state is pl.rho_mu


@given(seeds)
def test_sampled_index_in_range(seed):
    pl = plan(builtin("bb84"), 0.5, "paper", "paper")
    o = run_sampled(pl, "-", seed)
    assert o.success_copy_index is None or 1 <= o.success_copy_index <= pl.item("-").n_copies


def test_unknown_label():
    pl = plan(builtin("basis2"), 0.5)
    with pytest.raises(UnknownLabel):
        run_analytic(pl, "2")
    with pytest.raises(UnknownLabel):
        run_sampled(pl, "2", 0)


# -- audits ------------------------------------------------------------------

@pytest.mark.parametrize("eps", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_end_to_end_fidelity_tight_robust(name, eps):
    rep = audit(builtin(name), eps)
    assert rep.passed, rep.flags
    assert all(row.fidelity >= 1 - eps - 1e-9 for row in rep.rows)


@pytest.mark.parametrize("eps", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_communication_ordering_paper(name, eps):
    rep = audit(builtin(name), eps, "paper", "paper")
    rhs = accounting.ceil_tol(rep.upper_bound_rhs)
    assert all(rep.lower_bound <= row.comm_bits <= rhs for row in rep.rows)
    assert rep.flags["upper_bound"] and rep.flags["lower_bound"]


def test_const2_audit_small_epsilon():
    rep = audit(builtin("const2"), 0.1)
    assert rep.passed
    assert all(row.fidelity == pytest.approx(1.0) for row in rep.rows)


def test_success_table_is_informational():
    rep = audit(builtin("basis2"), 0.5, "paper", "paper")
    table = rep.success_table
    assert [row["label"] for row in table] == ["0", "1"]
    assert all(row["claimed"] == 1 - 1 / 16 for row in table)
    assert all(row["exact"] < row["claimed"] for row in table)
    assert rep.passed  # the shortfall does not fail the audit


def test_audit_fails_when_r_too_small():
    rep = audit(builtin("basis2"), 0.1, r=2.0)
    assert not rep.flags["fidelity"] and not rep.passed
