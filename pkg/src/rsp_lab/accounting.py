"""Copy counts, index lengths and success probabilities for repeated trials.

Per-copy success probabilities can be as small as 2^-1000 and copy counts as
large as 2^1000, so nothing here forms (1 - p)^N directly. Probabilities are
evaluated through ``ln(-ln(1 - p))``; integer copy counts go through mpmath
at a precision wide enough to resolve N exactly.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np

_LN2 = math.log(2.0)
_CEIL_SLACK = 1e-9


def ceil_tol(x: float, slack: float = _CEIL_SLACK) -> int:
    """Ceiling that ignores float noise just above an integer."""
    return math.ceil(x - slack * max(1.0, abs(x)))


def ceil_log2(n: int) -> int:
    """Exact ceil(log2 n) for a positive integer."""
    if n < 1:
        raise ValueError("n must be positive")
    return (n - 1).bit_length()


def _p_log2(p: float, log2_p: float | None) -> float:
    if log2_p is not None:
        return log2_p
    return math.log2(p) if p > 0 else -math.inf


def log_neg_log1m(p: float, log2_p: float | None = None) -> float:
    """ln(-ln(1 - p)); ``log2_p`` takes over once p underflows."""
    if p >= 1.0:
        return math.inf
    if p > 1e-12:
        return math.log(-math.log1p(-p))
    lp = _p_log2(p, log2_p) * _LN2
    # -ln(1-p) = p (1 + p/2 + ...) and p/2 is below double resolution here
    return lp + (p / 2.0 if p > 0 else 0.0)


def failure_log(p: float, n: int, log2_p: float | None = None) -> float:
    """ln((1 - p)^n)."""
    if n == 0:
        return 0.0
    if p >= 1.0:
        return -math.inf
    x = math.log(n) + log_neg_log1m(p, log2_p)
    if x > 709.0:
        return -math.inf
    return -math.exp(x)


def success_probability(p: float, n: int, log2_p: float | None = None) -> float:
    """1 - (1 - p)^n."""
    return -math.expm1(failure_log(p, n, log2_p))


def _mp_terms(p: float, log2_p: float | None):
    lp = _p_log2(p, log2_p)
    # enough bits to resolve integers up to ~1/p exactly
    prec = 96 + max(0, int(math.ceil(-lp)))
    return lp, prec


def robust_copies(p: float, r: float, log2_p: float | None = None) -> int:
    """Smallest N with (1 - p)^N <= 1/r."""
    if p >= 1.0:
        return 1
    lp, prec = _mp_terms(p, log2_p)
    with mpmath.workprec(prec):
        pm = mpmath.mpf(p) if p > 0 else mpmath.power(2, mpmath.mpf(lp))
        rate = -mpmath.log1p(-pm)
        target = mpmath.log(mpmath.mpf(r))
        n = max(1, int(mpmath.ceil(target / rate)))
        while n * rate < target:
            n += 1
        while n > 1 and (n - 1) * rate >= target:
            n -= 1
    return n


def sample_first_success(p: float, n: int, rng: np.random.Generator, log2_p: float | None = None) -> int | None:
    """1-based index of the first success among n Bernoulli(p) trials, or None.

    Inverse-CDF draw from the geometric law truncated at n: with U uniform on
    (0, 1], the index is ceil(ln U / ln(1 - p)) and the run fails when that
    exceeds n, i.e. when ln U <= n ln(1 - p). One uniform per run.
    """
    u = 1.0 - rng.random()
    if p >= 1.0:
        return 1
    log_u = math.log(u)
    if log_u <= failure_log(p, n, log2_p):
        return None
    if log_u == 0.0:
        return 1
    lp, prec = _mp_terms(p, log2_p)
    with mpmath.workprec(prec):
        pm = mpmath.mpf(p) if p > 0 else mpmath.power(2, mpmath.mpf(lp))
        idx = int(mpmath.ceil(mpmath.mpf(log_u) / mpmath.log1p(-pm)))
    return min(max(idx, 1), n)
