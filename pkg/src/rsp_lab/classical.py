"""Classical remote sampling by rejection against shared randomness.

Alice and Bob share i.i.d. samples s_1, s_2, ... from a base distribution q.
On input x Alice accepts sample s with probability min(1, p_x(s) / (t q(s)))
and sends the index of the first accepted sample; Bob outputs that sample,
or the first shared sample if Alice aborts. Thresholds, copy counts and the
index length follow the quantum protocol with divergences D(p_x || q).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from rsp_lab import capacity, qmath
from rsp_lab.accounting import ceil_log2, ceil_tol, robust_copies, sample_first_success, success_probability
from rsp_lab.ensemble import Encoding, builtin
from rsp_lab.errors import (CertificateInfeasible, InputError, ParseError, SupportViolation, UnknownLabel,
                            ValidationError)
from rsp_lab.jsonfmt import dumps
from rsp_lab.protocol import COPY_POLICIES, FIDELITY_SLACK, default_r, paper_rhs

SCHEMA_VERSION = "1"
# literal trial-by-trial simulation below this many shared samples
LITERAL_LIMIT = 4096


def _validated(label, probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{label!r}: distribution must be a nonempty vector", label=label)
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{label!r}: probabilities must be finite and nonnegative", label=label,
                              invariant="Negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{label!r}: probabilities sum to {p.sum():.12g}", label=label,
                              invariant="NotNormalized")
    return p / p.sum()


def kl_divergence(p, q) -> float:
    """D(p || q) in bits; ``inf`` when supp p is not inside supp q."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    on = p > 0
    if np.any(q[on] <= 0):
        return math.inf
    return float(max(np.sum(p[on] * np.log2(p[on] / q[on])), 0.0))


def bhattacharyya(p, q) -> float:
    return float(min(np.sum(np.sqrt(np.asarray(p) * np.asarray(q))), 1.0))


def total_variation(p, q) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


def diagonal_encoding(dists: Mapping[str, np.ndarray]) -> Encoding:
    return Encoding.from_items((label, np.diag(p)) for label, p in dists.items())


@dataclass(frozen=True, eq=False)
class ClassicalItem:
    divergence: float
    k: float
    log2_threshold: float
    mass: float
    accept_prob: float
    log2_accept: float
    n_copies: int
    comm_bits: int
    conditional: np.ndarray

    @property
    def threshold(self) -> float:
        return 2.0 ** self.log2_threshold


@dataclass(frozen=True, eq=False)
class ClassicalPlan:
    dists: dict[str, np.ndarray]
    base: np.ndarray
    epsilon: float
    r: float
    T: float
    mode: str
    copy_policy: str
    per_x: dict[str, ClassicalItem]

    @property
    def comm_bits(self) -> dict[str, int]:
        return {l: it.comm_bits for l, it in self.per_x.items()}

    @property
    def bound_rhs(self) -> float:
        return paper_rhs(self.epsilon, self.T)

    def item(self, x: str) -> ClassicalItem:
        try:
            return self.per_x[x]
        except KeyError:
            raise UnknownLabel(f"label {x!r} not in plan; labels are {list(self.per_x)}") from None


@dataclass(frozen=True, eq=False)
class ClassicalOutcome:
    label: str
    success_prob: float
    output_dist: np.ndarray
    tv_distance: float
    fidelity: float
    comm_bits_used: int
    mode: str
    seed: int | None = None
    success_copy_index: int | None = None
    symbol: int | None = None


def _unclipped_mass(p, q, log2_t: float) -> float:
    """p-mass of symbols whose ratio p/q never triggers clipping at threshold t."""
    ratio = np.divide(p, q, out=np.full_like(p, np.inf), where=q > 0)
    return float(p[ratio <= 2.0 ** min(log2_t, 1023.0) * (1 + 1e-12)].sum())


def _tight_log2_threshold(p, q, r: float) -> float:
    need = (r - 1.0) / r
    ratios = np.unique(np.divide(p[p > 0], q[p > 0]))
    for c in np.concatenate([[1.0], ratios[ratios > 1.0]]):
        if _unclipped_mass(p, q, math.log2(c)) >= need:
            return math.log2(c)
    raise CertificateInfeasible("no threshold reaches the required mass")  # unreachable: max ratio keeps all


def classical_plan(dists: Mapping[str, object], q=None, epsilon: float = 0.5, mode: str = "tight",
                   copy_policy: str = "robust", *, r: float | None = None) -> ClassicalPlan:
    """Rejection-sampling protocol for a family of distributions.

    Without ``q`` the base distribution is the capacity-achieving mixture,
    found by the capacity solver on the diagonal embedding. In ``paper`` mode
    the threshold is t = 2^{rk} with k = 8 D(p_x||q) + 14; in ``tight`` mode it
    is the smallest t >= 1 whose unclipped p-mass reaches (r-1)/r.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if mode not in ("paper", "tight"):
        raise ValueError(f"mode must be 'paper' or 'tight', got {mode!r}")
    if copy_policy not in COPY_POLICIES:
        raise ValueError(f"copy policy must be one of {COPY_POLICIES}, got {copy_policy!r}")
    dists = {str(l): _validated(l, p) for l, p in dists.items()}
    sizes = {p.size for p in dists.values()}
    if len(sizes) != 1:
        raise ValidationError(f"distributions over different alphabets: sizes {sorted(sizes)}")
    r = default_r(epsilon) if r is None else float(r)
    cap = capacity.solve_capacity(diagonal_encoding(dists))
    if q is None:
        base = np.tensordot(cap.mu_star.weights, np.stack(list(dists.values())), axes=1)
    else:
        base = _validated("base", q)
        if base.size != sizes.pop():
            raise ValidationError("base distribution has the wrong alphabet size")
    per_x = {}
    for label, p in dists.items():
        d = kl_divergence(p, base)
        if math.isinf(d):
            raise SupportViolation(f"supp(p_{label}) is not inside supp(q)", label=label)
        k = 8.0 * d + 14.0
        log2_t = r * k if mode == "paper" else _tight_log2_threshold(p, base, r)
        t = 2.0 ** log2_t if log2_t < 1023 else math.inf
        clipped = np.minimum(p, t * base)
        mass = float(clipped.sum())
        log2_a = math.log2(mass) - log2_t
        a = 2.0 ** log2_a
        if copy_policy == "paper":
            n = 1 << ceil_tol(r * k)
        else:
            n = robust_copies(a, r, log2_a)
        per_x[label] = ClassicalItem(d, k, log2_t, mass, a, log2_a, n, ceil_log2(n), clipped / mass)
    return ClassicalPlan(dists, base, float(epsilon), r, cap.value, mode, copy_policy, per_x)


def classical_run(plan_: ClassicalPlan, x: str, seed: int | None = None) -> ClassicalOutcome:
    """Outcome for input x: analytic when ``seed`` is None, else one simulated run."""
    item = plan_.item(x)
    p = plan_.dists[x]
    s = success_probability(item.accept_prob, item.n_copies, item.log2_accept)
    out = s * item.conditional + (1.0 - s) * plan_.base
    common = dict(label=x, success_prob=s, output_dist=out, tv_distance=total_variation(out, p),
                  fidelity=bhattacharyya(out, p), comm_bits_used=ceil_log2(item.n_copies + 1))
    if seed is None:
        return ClassicalOutcome(mode="analytic", **common)
    rng = np.random.default_rng(seed)
    alphabet = np.arange(p.size)
    idx, symbol = None, None
    if item.n_copies <= LITERAL_LIMIT:
        t = item.threshold
        first = None
        for i in range(1, item.n_copies + 1):
            shared = int(rng.choice(alphabet, p=plan_.base))
            first = shared if first is None else first
            if rng.random() * t * plan_.base[shared] < p[shared]:
                idx, symbol = i, shared
                break
        if idx is None:
            symbol = first
    else:
        idx = sample_first_success(item.accept_prob, item.n_copies, rng, item.log2_accept)
        law = item.conditional if idx is not None else plan_.base
        symbol = int(rng.choice(alphabet, p=law))
    return ClassicalOutcome(mode="sampled", seed=seed, success_copy_index=idx, symbol=symbol, **common)


@dataclass(frozen=True, eq=False)
class ClassicalAudit:
    plan: ClassicalPlan
    outcomes: tuple[ClassicalOutcome, ...]
    flags: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def classical_audit(dists, q=None, epsilon: float = 0.5, mode: str = "tight", copy_policy: str = "robust",
                    *, r: float | None = None) -> ClassicalAudit:
    pl = classical_plan(dists, q, epsilon, mode, copy_policy, r=r)
    outs = tuple(classical_run(pl, x) for x in pl.dists)
    flags = {
        "fidelity": bool(all(o.fidelity >= 1.0 - epsilon - FIDELITY_SLACK for o in outs)),
        "lower_bound": bool(max(pl.comm_bits.values()) >= pl.T / 2.0),
    }
    if copy_policy == "paper":
        flags["upper_bound"] = bool(all(b <= ceil_tol(pl.bound_rhs) for b in pl.comm_bits.values()))
    return ClassicalAudit(pl, outs, flags)


# -- files -------------------------------------------------------------------

def distributions_document(dists: Mapping[str, np.ndarray], base=None) -> dict:
    dists = {l: np.asarray(p, dtype=float) for l, p in dists.items()}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "alphabet_size": int(next(iter(dists.values())).size),
        "items": [{"label": l, "probs": [float(v) for v in p]} for l, p in dists.items()],
    }
    if base is not None:
        doc["base"] = [float(v) for v in base]
    return doc


def save_distributions(dists, path=None, base=None) -> str:
    text = dumps(distributions_document(dists, base), indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_distributions(source) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
    """Read a distribution-family file, or ``builtin:<name>`` for a diagonal built-in ensemble."""
    if isinstance(source, str) and source.startswith("builtin:"):
        e = builtin(source.split(":", 1)[1])
        if not e.is_diagonal():
            raise InputError(f"builtin {source!r} is not diagonal, so it has no classical version")
        return {l: np.real(np.diag(s.matrix)).copy() for l, s in e.items()}, None
    text = Path(source).read_text(encoding="utf-8") if not str(source).lstrip().startswith("{") else source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, f"line {err.lineno} column {err.colno}") from err
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError("unsupported or missing schema_version", "$.schema_version")
    size = doc.get("alphabet_size")
    items = doc.get("items")
    if not isinstance(size, int) or size < 1:
        raise ParseError("alphabet_size must be a positive integer", "$.alphabet_size")
    if not isinstance(items, list) or not items:
        raise ParseError("items must be a nonempty list", "$.items")
    dists = {}
    for n, item in enumerate(items):
        where = f"$.items[{n}]"
        if not isinstance(item, dict) or not isinstance(item.get("label"), str) or not item["label"]:
            raise ParseError("item needs a nonempty string label", where)
        probs = item.get("probs")
        if not isinstance(probs, list) or len(probs) != size:
            raise ParseError(f"probs must list {size} numbers", where + ".probs")
        if item["label"] in dists:
            raise ValidationError(f"duplicate label {item['label']!r}", invariant="DuplicateLabel",
                                  label=item["label"])
        dists[item["label"]] = _validated(item["label"], probs)
    base = doc.get("base")
    if base is not None:
        if not isinstance(base, list) or len(base) != size:
            raise ParseError(f"base must list {size} numbers", "$.base")
        base = _validated("base", base)
    return dists, base
