"""Compiled exhaustive scan of the simplex grid used by the brute-force capacity oracle.

The grid is every composition ``n`` of ``N`` into ``m <= 4`` parts, giving
``mu = n / N``. At each point the Holevo quantity is evaluated through the
entropy form ``S(rho_mu) - sum_x mu_x S(rho_x)``, which is independent of the
divergence form used by the iterative solver.
"""

import math

import numba
import numpy as np


_WINDOW = 2


@numba.njit(cache=True)
def _h(vals):
    s = 0.0
    for v in vals:
        if v > 0.0:
            s -= v * math.log2(v)
    return s


@numba.njit(cache=True, inline="always")
def _qubit_value(z, br, bi, lin):
    disc = min(math.sqrt(z * z + 4.0 * (br * br + bi * bi)), 1.0)
    lp = 0.5 * (1.0 + disc)
    lm = max(0.5 * (1.0 - disc), 1e-300)
    return -lin - lp * math.log2(lp) - lm * math.log2(lm)


@numba.njit(cache=True)
def _scan_qubit(diag0, diag1, offd, ent, n_states, big_n, line_search):
    # Pads to four states; unused coordinates are pinned at zero. Along the
    # innermost axis one unit of weight moves from the last state to the
    # third, so the averaged entries are affine in c2.
    coef = np.zeros((4, 5))
    for x in range(n_states):
        coef[x, 0] = diag0[x] - diag1[x]
        coef[x, 1] = offd[x].real
        coef[x, 2] = offd[x].imag
        coef[x, 3] = ent[x]
    last = n_states - 1
    # the last used state absorbs the remainder; move it to slot 3
    if last != 3:
        for j in range(4):
            coef[3, j] = coef[last, j]
            coef[last, j] = 0.0
    lim0 = big_n if n_states >= 2 else 0
    lim1 = big_n if n_states >= 3 else 0
    lim2 = big_n if n_states >= 4 else 0
    inv = 1.0 / big_n
    dz = (coef[2, 0] - coef[3, 0]) * inv
    dr = (coef[2, 1] - coef[3, 1]) * inv
    di = (coef[2, 2] - coef[3, 2]) * inv
    dl = (coef[2, 3] - coef[3, 3]) * inv
    best = -1.0
    b0 = 0
    b1 = 0
    for c0 in range(lim0 + 1):
        for c1 in range(min(lim1, big_n - c0) + 1):
            rest = big_n - c0 - c1
            z0 = (c0 * coef[0, 0] + c1 * coef[1, 0] + rest * coef[3, 0]) * inv
            r0 = (c0 * coef[0, 1] + c1 * coef[1, 1] + rest * coef[3, 1]) * inv
            i0 = (c0 * coef[0, 2] + c1 * coef[1, 2] + rest * coef[3, 2]) * inv
            l0 = (c0 * coef[0, 3] + c1 * coef[1, 3] + rest * coef[3, 3]) * inv
            top = min(lim2, rest)
            lo = 0
            hi = top
            if line_search:
                # concave along the line: bisect on the sign of the forward difference
                while hi - lo > 2:
                    mid = (lo + hi) // 2
                    f0 = _qubit_value(z0 + mid * dz, r0 + mid * dr, i0 + mid * di, l0 + mid * dl)
                    f1 = _qubit_value(z0 + (mid + 1) * dz, r0 + (mid + 1) * dr,
                                      i0 + (mid + 1) * di, l0 + (mid + 1) * dl)
                    if f1 > f0:
                        lo = mid + 1
                    else:
                        hi = mid
                lo = max(lo - _WINDOW, 0)
                hi = min(hi + _WINDOW, top)
            line = -1.0
            for c2 in range(lo, hi + 1):
                line = max(line, _qubit_value(z0 + c2 * dz, r0 + c2 * dr, i0 + c2 * di, l0 + c2 * dl))
            if line > best:
                best = line
                b0 = c0
                b1 = c1
    rest = big_n - b0 - b1
    z0 = (b0 * coef[0, 0] + b1 * coef[1, 0] + rest * coef[3, 0]) * inv
    r0 = (b0 * coef[0, 1] + b1 * coef[1, 1] + rest * coef[3, 1]) * inv
    i0 = (b0 * coef[0, 2] + b1 * coef[1, 2] + rest * coef[3, 2]) * inv
    l0 = (b0 * coef[0, 3] + b1 * coef[1, 3] + rest * coef[3, 3]) * inv
    b2 = 0
    line = -1.0
    for c2 in range(min(lim2, rest) + 1):
        v = _qubit_value(z0 + c2 * dz, r0 + c2 * dr, i0 + c2 * di, l0 + c2 * dl)
        if v > line:
            line = v
            b2 = c2
    counts = np.zeros(4, dtype=np.int64)
    counts[0] = b0
    counts[1] = b1
    counts[2] = b2
    counts[3] = big_n - b0 - b1 - b2
    if last != 3:
        counts[last] = counts[3]
        counts[3] = 0
    return best, counts


@numba.njit(cache=True)
def _scan_general(states, ent, n_states, big_n):
    dim = states.shape[1]
    best = -1.0
    best_counts = np.zeros(4, dtype=np.int64)
    free = n_states - 1
    inv = 1.0 / big_n
    rho = np.empty((dim, dim), dtype=np.complex128)
    for c0 in range(big_n + 1 if free >= 1 else 1):
        for c1 in range(big_n - c0 + 1 if free >= 2 else 1):
            for c2 in range(big_n - c0 - c1 + 1 if free >= 3 else 1):
                rest = big_n - c0 - c1 - c2
                cnt = (c0, c1, c2)
                rho[:, :] = rest * inv * states[free]
                lin = rest * inv * ent[free]
                for x in range(free):
                    w = cnt[x] * inv
                    rho += w * states[x]
                    lin += w * ent[x]
                val = _h(np.linalg.eigvalsh(rho)) - lin
                if val > best:
                    best = val
                    best_counts[0] = c0
                    best_counts[1] = c1
                    best_counts[2] = c2
                    best_counts[free] = rest
    return best, best_counts


def scan(states: np.ndarray, entropies: np.ndarray, big_n: int,
         exhaustive: bool = False) -> tuple[float, np.ndarray]:
    """Max of the Holevo quantity over the grid; returns (value, counts).

    For qubits the innermost grid axis is, by default, maximized by bisection
    on forward differences, which is exact for concave sequences (the Holevo
    quantity is concave in the prior). ``exhaustive=True`` evaluates every
    grid point instead.
    """
    m = states.shape[0]
    if not 1 <= m <= 4:
        raise ValueError("grid scan supports 1 to 4 states")
    states = np.ascontiguousarray(states, dtype=np.complex128)
    ent = np.ascontiguousarray(entropies, dtype=np.float64)
    if states.shape[1] == 2:
        best, counts = _scan_qubit(
            np.ascontiguousarray(states[:, 0, 0].real),
            np.ascontiguousarray(states[:, 1, 1].real),
            np.ascontiguousarray(states[:, 0, 1]),
            ent, m, big_n, not exhaustive,
        )
    else:
        best, counts = _scan_general(states, ent, m, big_n)
    return float(best), counts[:m].copy()
