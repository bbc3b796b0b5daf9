"""Numerical tolerances shared by every module."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

ENV_PREFIX = "RSP_LAB_TOL_"


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-9
    trace: float = 1e-9
    psd: float = 1e-9
    support: float = 1e-10
    state: float = 1e-8
    roundtrip: float = 1e-8
    unitary: float = 1e-9
    norm: float = 1e-9
    capacity: float = 1e-8

    def replace(self, **overrides) -> "Tolerances":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise KeyError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **{k: float(v) for k, v in overrides.items()})

    @classmethod
    def from_env(cls, environ=None) -> "Tolerances":
        """Defaults overridden by ``RSP_LAB_TOL_<NAME>`` variables, e.g. ``RSP_LAB_TOL_PSD=1e-8``."""
        environ = os.environ if environ is None else environ
        overrides = {}
        for f in dataclasses.fields(cls):
            raw = environ.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                overrides[f.name] = float(raw)
        return cls().replace(**overrides)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_TOLERANCES = Tolerances()


def resolve(tol: Tolerances | None) -> Tolerances:
    return DEFAULT_TOLERANCES if tol is None else tol
