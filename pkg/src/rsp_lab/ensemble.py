"""Encodings x -> rho_x over a finite label set, built-in test ensembles and file I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from rsp_lab import qmath
from rsp_lab.config import Tolerances, resolve
from rsp_lab.errors import IndexMismatch, ParseError, UnknownLabel, UnknownName, ValidationError
from rsp_lab.jsonfmt import dumps
from rsp_lab.qmath import DensityMatrix

SCHEMA_VERSION = "1"


@dataclass(frozen=True, eq=False)
class Encoding:
    labels: tuple[str, ...]
    states: tuple[DensityMatrix, ...]

    def __post_init__(self):
        if not self.labels:
            raise ValidationError("an encoding needs at least one item", invariant="Empty")
        if len(self.labels) != len(self.states):
            raise ValidationError("labels and states differ in length", invariant="Length")
        for label in self.labels:
            if not isinstance(label, str) or not label:
                raise ValidationError(f"labels must be nonempty strings, got {label!r}", invariant="EmptyLabel")
        if len(set(self.labels)) != len(self.labels):
            dupes = sorted({l for l in self.labels if self.labels.count(l) > 1})
            raise ValidationError(f"duplicate labels: {dupes}", invariant="DuplicateLabel", label=dupes[0])
        dims = {s.dim for s in self.states}
        if len(dims) != 1:
            raise ValidationError(f"states have mixed dimensions {sorted(dims)}", invariant="DimMismatch")

    @classmethod
    def from_items(cls, items: Iterable[tuple[str, object]], tol: Tolerances | None = None) -> "Encoding":
        labels, states = [], []
        for label, m in items:
            try:
                states.append(qmath.validate_density(m, tol))
            except ValidationError as err:
                raise type(err)(f"state {label!r}: {err}", invariant=err.invariant,
                                violation=err.violation, label=label) from err
            labels.append(label)
        return cls(tuple(labels), tuple(states))

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, label: str) -> DensityMatrix:
        return self.states[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"no item labelled {label!r}; labels are {list(self.labels)}") from None

    def items(self):
        return zip(self.labels, self.states)

    def is_diagonal(self, atol: float = 1e-12) -> bool:
        return all(np.allclose(s.matrix, np.diag(np.diag(s.matrix)), atol=atol) for s in self.states)


@dataclass(frozen=True, eq=False)
class Distribution:
    labels: tuple[str, ...]
    weights: np.ndarray

    @classmethod
    def from_weights(cls, labels, weights, tol: Tolerances | None = None) -> "Distribution":
        tol = resolve(tol)
        w = np.asarray(weights, dtype=float).copy()
        labels = tuple(labels)
        if w.shape != (len(labels),):
            raise IndexMismatch(f"{w.size} weights for {len(labels)} labels")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weights must be finite and nonnegative", invariant="Negative")
        if abs(w.sum() - 1.0) > tol.trace:
            raise ValidationError(f"weights sum to {w.sum():.12g}", invariant="NotNormalized",
                                  violation=abs(w.sum() - 1.0))
        w /= w.sum()
        w.setflags(write=False)
        return cls(labels, w)

    @classmethod
    def uniform(cls, labels) -> "Distribution":
        labels = tuple(labels)
        return cls.from_weights(labels, np.full(len(labels), 1.0 / len(labels)))

    @classmethod
    def point_mass(cls, labels, at: str) -> "Distribution":
        labels = tuple(labels)
        w = np.zeros(len(labels))
        w[labels.index(at)] = 1.0
        return cls.from_weights(labels, w)

    @classmethod
    def from_mapping(cls, labels, mapping: Mapping[str, float], tol: Tolerances | None = None) -> "Distribution":
        labels = tuple(labels)
        if set(mapping) != set(labels):
            raise IndexMismatch(f"distribution labels {sorted(mapping)} do not match encoding {sorted(labels)}")
        return cls.from_weights(labels, [float(mapping[l]) for l in labels], tol)

    def as_dict(self) -> dict[str, float]:
        return {l: float(w) for l, w in zip(self.labels, self.weights)}

    def __getitem__(self, label: str) -> float:
        return float(self.weights[self.labels.index(label)])


def _check_index(e: Encoding, mu: Distribution) -> None:
    if tuple(mu.labels) != tuple(e.labels):
        raise IndexMismatch(f"distribution over {list(mu.labels)} does not match encoding {list(e.labels)}")


def average_state(e: Encoding, mu: Distribution) -> DensityMatrix:
    """rho_mu = sum_x p_x rho_x."""
    _check_index(e, mu)
    stack = np.stack([s.matrix for s in e.states])
    return qmath.validate_density(np.tensordot(mu.weights, stack, axes=1))


# -- built-ins ---------------------------------------------------------------

_S = 1 / math.sqrt(2)


def _pure(*amps):
    return qmath.projector(np.array(amps, dtype=complex)).matrix


def _builtin_items(name):
    if name == "basis2":
        return [("0", _pure(1, 0)), ("1", _pure(0, 1))]
    if name == "bb84":
        return [("0", _pure(1, 0)), ("1", _pure(0, 1)), ("+", _pure(_S, _S)), ("-", _pure(_S, -_S))]
    if name == "pair0plus":
        return [("0", _pure(1, 0)), ("+", _pure(_S, _S))]
    if name == "const2":
        return [("a", np.eye(2) / 2), ("b", np.eye(2) / 2)]
    if name == "cmixed2":
        return [("0", np.diag([0.75, 0.25])), ("1", np.diag([0.25, 0.75]))]
    raise UnknownName(f"unknown builtin ensemble {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


BUILTIN_NAMES = ("basis2", "bb84", "pair0plus", "const2", "cmixed2")


def builtin(name: str) -> Encoding:
    return Encoding.from_items(_builtin_items(name))


# -- files -------------------------------------------------------------------

def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _matrix_from_json(rows, dim: int, where: str) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != dim:
        raise ParseError(f"expected {dim} rows", where)
    out = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise ParseError(f"expected {dim} entries", f"{where}[{i}]")
        for j, z in enumerate(row):
            ok = isinstance(z, list) and len(z) == 2 and all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in z)
            if not ok:
                raise ParseError("entry must be a [re, im] pair of numbers", f"{where}[{i}][{j}]")
            out[i, j] = complex(z[0], z[1])
    return out


def encoding_to_document(e: Encoding, mu: Distribution | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dim": e.dim,
        "items": [{"label": l, "matrix": _matrix_to_json(s.matrix)} for l, s in e.items()],
    }
    if mu is not None:
        _check_index(e, mu)
        doc["distribution"] = mu.as_dict()
    return doc


def save_ensemble(e: Encoding, path=None, mu: Distribution | None = None) -> str:
    """Serialize to the ensemble file format; writes ``path`` if given and returns the text."""
    text = dumps(encoding_to_document(e, mu), indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_ensemble(doc, tol: Tolerances | None = None) -> tuple[Encoding, Distribution | None]:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}", "$.schema_version")
    dim = doc.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError("dim must be a positive integer", "$.dim")
    items = doc.get("items")
    if not isinstance(items, list) or not items:
        raise ParseError("items must be a nonempty list", "$.items")
    parsed = []
    for n, item in enumerate(items):
        where = f"$.items[{n}]"
        if not isinstance(item, dict) or not isinstance(item.get("label"), str):
            raise ParseError("item needs a string label", where)
        parsed.append((item["label"], _matrix_from_json(item.get("matrix"), dim, where + ".matrix")))
    e = Encoding.from_items(parsed, tol)
    mu = None
    if doc.get("distribution") is not None:
        dist = doc["distribution"]
        if not isinstance(dist, dict):
            raise ParseError("distribution must be an object", "$.distribution")
        mu = Distribution.from_mapping(e.labels, dist, tol)
    return e, mu


def load_ensemble(source, tol: Tolerances | None = None) -> tuple[Encoding, Distribution | None]:
    """Load from a path or from the document text itself."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, f"line {err.lineno} column {err.colno}") from err
    return parse_ensemble(doc, tol)


# -- perturbation ------------------------------------------------------------

def _mixture(rho: DensityMatrix, target: DensityMatrix, lam: float) -> DensityMatrix:
    return qmath.validate_density((1 - lam) * rho.matrix + lam * target.matrix)


def _max_mixing(rho: DensityMatrix, target: DensityMatrix, floor: float, steps: int = 60) -> float:
    """Largest lam in [0, 1] with F((1-lam) rho + lam target, rho) >= floor.

    F is concave in its first argument and equals 1 at lam = 0, hence
    nonincreasing along the segment; bisection applies.
    """
    def fid(lam):
        return qmath.fidelity(_mixture(rho, target, lam), rho)

    if fid(1.0) >= floor:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if fid(mid) >= floor:
            lo = mid
        else:
            hi = mid
    return lo


def perturb(e: Encoding, epsilon: float, seed: int = 0, strategy: str = "depolarize") -> Encoding:
    """Perturbed encoding with F(rho'_x, rho_x) >= 1 - epsilon for every item.

    ``depolarize`` mixes each state toward I/d; ``random`` mixes toward a
    random state drawn from ``seed`` (one per item). In both cases the mixing
    weight is the largest one meeting the fidelity constraint.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    if strategy not in ("depolarize", "random"):
        raise ValueError(f"unknown perturbation strategy {strategy!r}")
    rng = np.random.default_rng(seed)
    floor = 1.0 - epsilon
    out = []
    for label, rho in e.items():
        if strategy == "depolarize":
            target = qmath.maximally_mixed(rho.dim)
        else:
            target = qmath.random_density_matrix(rho.dim, rng)
        lam = _max_mixing(rho, target, floor) if epsilon > 0 else 0.0
        new = _mixture(rho, target, lam)
        # slack covers round-off in F itself (F(rho, rho) can read 1 - 1e-15)
        if qmath.fidelity(new, rho) < floor - 1e-12:
            raise AssertionError(f"perturbation of {label!r} broke its fidelity constraint")
        out.append((label, new))
    return Encoding.from_items(out)
