"""Structured reports: plain-dict views of results plus the envelope schema.

Every command's result is converted to JSON-ready dicts here, so the text
renderer and the JSON writer see the same numbers. Matrices are row-major
lists of ``[re, im]`` pairs, as in ensemble files.
"""

from __future__ import annotations

import math

import jsonschema
import numpy as np

from rsp_lab import __version__
from rsp_lab.capacity import BruteForceResult, CapacityResult
from rsp_lab.classical import ClassicalAudit, ClassicalOutcome, ClassicalPlan
from rsp_lab.ensemble import _matrix_to_json
from rsp_lab.jsonfmt import dumps
from rsp_lab.protocol import AuditReport, ProtocolOutcome, ProtocolPlan
from rsp_lab.substate import SubstateCertificate, VerificationReport

UNIT = "bits"


def _log2_int(n: int) -> float:
    return math.log2(n) if n > 0 else -math.inf


def capacity_dict(res: CapacityResult) -> dict:
    return {
        "unit": UNIT,
        "value": res.value,
        "gap": res.gap,
        "upper_bound": res.upper_bound,
        "iterations": res.iterations,
        "converged": res.converged,
        "mu_star": res.mu_star.as_dict(),
        "per_x_divergence": dict(res.per_x_divergence),
    }


def minimax_dict(res: CapacityResult, slack: float) -> dict:
    worst = max(res.per_x_divergence.values())
    return {
        "unit": UNIT,
        "T": res.value,
        "mu_star": res.mu_star.as_dict(),
        "per_x_divergence": dict(res.per_x_divergence),
        "max_divergence": worst,
        "slack": slack,
        "bound_holds": bool(worst <= res.value + slack),
    }


def brute_force_dict(res: BruteForceResult) -> dict:
    return {"unit": UNIT, "value": res.value, "slack": res.slack, "points": res.points, "mu": res.mu.as_dict()}


def verification_dict(rep: VerificationReport) -> dict:
    return {
        "passed": rep.passed,
        "clauses": [{"name": c.name, "passed": bool(c.passed), "measured": float(c.measured),
                     "required": float(c.required)} for c in rep.clauses],
    }


def certificate_dict(label: str, c: SubstateCertificate, rep: VerificationReport) -> dict:
    return {
        "unit": UNIT,
        "label": label,
        "mode": c.mode,
        "r": c.r,
        "divergence": c.divergence,
        "k": c.k,
        "p": c.p,
        "log2_p": c.log2_p,
        "log2_threshold": c.log2_threshold,
        "weight_w": c.weight_w,
        "fidelity_phi": c.fidelity_phi,
        "fidelity_floor": c.fidelity_floor,
        "phi_marginal": _matrix_to_json(c.phi_marginal.matrix),
        "verification": verification_dict(rep),
    }


def plan_dict(pl: ProtocolPlan) -> dict:
    return {
        "unit": UNIT,
        "epsilon": pl.epsilon,
        "r": pl.r,
        "mode": pl.mode,
        "copy_policy": pl.copy_policy,
        "T": pl.T,
        "mu_star": pl.mu_star.as_dict(),
        "upper_bound_rhs": pl.bound_rhs,
        "per_x": {l: {"k": it.k, "p": it.p, "log2_p": it.log2_p, "log2_n_copies": _log2_int(it.n_copies),
                      "n_copies": str(it.n_copies), "comm_bits": it.comm_bits}
                  for l, it in pl.per_x.items()},
        "comm_bits": pl.comm_bits,
    }


def outcome_dict(o: ProtocolOutcome) -> dict:
    return {
        "label": o.label,
        "mode": o.mode,
        "success_prob": o.success_prob,
        "fidelity": o.fidelity,
        "comm_bits_used": o.comm_bits_used,
        "seed": o.seed,
        "success_copy_index": None if o.success_copy_index is None else str(o.success_copy_index),
        "succeeded": o.succeeded,
        "output_state": _matrix_to_json(o.output_state.matrix),
    }


def audit_dict(a: AuditReport) -> dict:
    return {
        "unit": UNIT,
        "T": a.T,
        "epsilon": a.epsilon,
        "r": a.r,
        "mode": a.mode,
        "copy_policy": a.copy_policy,
        "lower_bound": a.lower_bound,
        "upper_bound_rhs": a.upper_bound_rhs,
        "rows": [{"label": row.label, "k": row.k, "p": row.p, "log2_p": row.log2_p,
                  "log2_n_copies": _log2_int(row.n_copies), "comm_bits": row.comm_bits,
                  "comm_bits_used": row.comm_bits_used, "fidelity": row.fidelity,
                  "fidelity_ok": row.fidelity_ok} for row in a.rows],
        "success_table": a.success_table,
        "flags": dict(a.flags),
        "passed": a.passed,
    }


def classical_plan_dict(pl: ClassicalPlan) -> dict:
    return {
        "unit": UNIT,
        "epsilon": pl.epsilon,
        "r": pl.r,
        "mode": pl.mode,
        "copy_policy": pl.copy_policy,
        "T": pl.T,
        "base": [float(v) for v in pl.base],
        "upper_bound_rhs": pl.bound_rhs,
        "per_x": {l: {"divergence": it.divergence, "k": it.k, "log2_threshold": it.log2_threshold,
                      "accept_prob": it.accept_prob, "log2_accept": it.log2_accept,
                      "log2_n_copies": _log2_int(it.n_copies), "n_copies": str(it.n_copies),
                      "comm_bits": it.comm_bits}
                  for l, it in pl.per_x.items()},
        "comm_bits": pl.comm_bits,
    }


def classical_outcome_dict(o: ClassicalOutcome) -> dict:
    return {
        "label": o.label,
        "mode": o.mode,
        "success_prob": o.success_prob,
        "tv_distance": o.tv_distance,
        "fidelity": o.fidelity,
        "comm_bits_used": o.comm_bits_used,
        "seed": o.seed,
        "success_copy_index": None if o.success_copy_index is None else str(o.success_copy_index),
        "symbol": o.symbol,
        "output_dist": [float(v) for v in o.output_dist],
    }


def classical_audit_dict(a: ClassicalAudit) -> dict:
    return {
        "plan": classical_plan_dict(a.plan),
        "outcomes": [classical_outcome_dict(o) for o in a.outcomes],
        "flags": dict(a.flags),
        "passed": a.passed,
    }


def envelope(command: str, config: dict, result: dict) -> dict:
    return {"tool_version": __version__, "command": command, "config": config, "result": result}


# -- schema --------------------------------------------------------------------
# Non-finite floats are written as strings, so every number slot accepts them.

_NUM = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {
    "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}}
_NUM_MAP = {"type": "object", "additionalProperties": _NUM}
_INT_MAP = {"type": "object", "additionalProperties": {"type": "integer"}}
_FLAGS = {"type": "object", "additionalProperties": {"type": "boolean"}}
_BIG_INT = {"type": "string", "pattern": "^[0-9]+$"}


def _obj(props: dict, required=None) -> dict:
    return {"type": "object", "properties": props, "required": list(required or props)}


_VERIFICATION = _obj({"passed": {"type": "boolean"}, "clauses": {"type": "array", "items": _obj(
    {"name": {"type": "string"}, "passed": {"type": "boolean"}, "measured": _NUM, "required": _NUM})}})

_PLAN = _obj({
    "unit": {"const": UNIT}, "epsilon": _NUM, "r": _NUM, "mode": {"enum": ["paper", "tight"]},
    "copy_policy": {"enum": ["paper", "robust"]}, "T": _NUM, "mu_star": _NUM_MAP, "upper_bound_rhs": _NUM,
    "per_x": {"type": "object", "additionalProperties": _obj(
        {"k": _NUM, "p": _NUM, "log2_p": _NUM, "log2_n_copies": _NUM, "n_copies": _BIG_INT,
         "comm_bits": {"type": "integer"}})},
    "comm_bits": _INT_MAP,
})

_OUTCOME = _obj({
    "label": {"type": "string"}, "mode": {"enum": ["analytic", "sampled"]}, "success_prob": _NUM,
    "fidelity": _NUM, "comm_bits_used": {"type": "integer"}, "seed": {"type": ["integer", "null"]},
    "success_copy_index": {"oneOf": [_BIG_INT, {"type": "null"}]}, "succeeded": {"type": ["boolean", "null"]},
    "output_state": _MATRIX,
})

_AUDIT = _obj({
    "unit": {"const": UNIT}, "T": _NUM, "epsilon": _NUM, "r": _NUM, "mode": {"type": "string"},
    "copy_policy": {"type": "string"}, "lower_bound": _NUM, "upper_bound_rhs": _NUM,
    "rows": {"type": "array", "items": _obj(
        {"label": {"type": "string"}, "k": _NUM, "p": _NUM, "log2_p": _NUM, "log2_n_copies": _NUM,
         "comm_bits": {"type": "integer"}, "comm_bits_used": {"type": "integer"}, "fidelity": _NUM,
         "fidelity_ok": {"type": "boolean"}})},
    "success_table": {"type": "array", "items": _obj(
        {"label": {"type": "string"}, "claimed": _NUM, "exact": _NUM, "log2_p": _NUM, "n_copies_log2": _NUM})},
    "flags": _FLAGS, "passed": {"type": "boolean"},
})

_CPLAN = _obj({
    "unit": {"const": UNIT}, "epsilon": _NUM, "r": _NUM, "mode": {"enum": ["paper", "tight"]},
    "copy_policy": {"enum": ["paper", "robust"]}, "T": _NUM, "base": {"type": "array", "items": _NUM},
    "upper_bound_rhs": _NUM,
    "per_x": {"type": "object", "additionalProperties": _obj(
        {"divergence": _NUM, "k": _NUM, "log2_threshold": _NUM, "accept_prob": _NUM, "log2_accept": _NUM,
         "log2_n_copies": _NUM, "n_copies": _BIG_INT, "comm_bits": {"type": "integer"}})},
    "comm_bits": _INT_MAP,
})

_COUTCOME = _obj({
    "label": {"type": "string"}, "mode": {"enum": ["analytic", "sampled"]}, "success_prob": _NUM,
    "tv_distance": _NUM, "fidelity": _NUM, "comm_bits_used": {"type": "integer"},
    "seed": {"type": ["integer", "null"]}, "success_copy_index": {"oneOf": [_BIG_INT, {"type": "null"}]},
    "symbol": {"type": ["integer", "null"]}, "output_dist": {"type": "array", "items": _NUM},
})

RESULT_SCHEMAS = {
    "capacity": _obj({"unit": {"const": UNIT}, "value": _NUM, "gap": _NUM, "upper_bound": _NUM,
                      "iterations": {"type": "integer"}, "converged": {"type": "boolean"},
                      "mu_star": _NUM_MAP, "per_x_divergence": _NUM_MAP,
                      "brute_force": _obj({"unit": {"const": UNIT}, "value": _NUM, "slack": _NUM,
                                           "points": {"type": "integer"}, "mu": _NUM_MAP})},
                     required=["unit", "value", "gap", "upper_bound", "iterations", "converged", "mu_star",
                               "per_x_divergence"]),
    "minimax": _obj({"unit": {"const": UNIT}, "T": _NUM, "mu_star": _NUM_MAP, "per_x_divergence": _NUM_MAP,
                     "max_divergence": _NUM, "slack": _NUM, "bound_holds": {"type": "boolean"}}),
    "substate": _obj({"unit": {"const": UNIT}, "label": {"type": "string"}, "mode": {"enum": ["paper", "tight"]},
                      "r": _NUM, "divergence": _NUM, "k": _NUM, "p": _NUM, "log2_p": _NUM,
                      "log2_threshold": _NUM, "weight_w": _NUM, "fidelity_phi": _NUM, "fidelity_floor": _NUM,
                      "phi_marginal": _MATRIX, "verification": _VERIFICATION}),
    "rsp plan": _PLAN,
    "rsp run": _OUTCOME,
    "rsp audit": _AUDIT,
    "classical plan": _CPLAN,
    "classical run": _COUTCOME,
    "classical audit": _obj({"plan": _CPLAN, "outcomes": {"type": "array", "items": _COUTCOME},
                             "flags": _FLAGS, "passed": {"type": "boolean"}}),
    "fannes": _obj({"unit": {"const": UNIT}, "T": _NUM, "T_prime": _NUM, "delta": _NUM, "bound": _NUM,
                    "max_trace_distance": _NUM, "holds": {"type": "boolean"}}),
    "perturb": _obj({"schema_version": {"const": "1"}, "dim": {"type": "integer"},
                     "items": {"type": "array", "items": _obj({"label": {"type": "string"}, "matrix": _MATRIX})}},
                    required=["schema_version", "dim", "items"]),
}

ENVELOPE_SCHEMA = _obj({
    "tool_version": {"type": "string"},
    "command": {"enum": sorted(RESULT_SCHEMAS)},
    "config": {"type": "object"},
    "result": {"type": "object"},
})


def validate_report(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``doc`` is a valid report."""
    jsonschema.validate(doc, ENVELOPE_SCHEMA)
    jsonschema.validate(doc["result"], RESULT_SCHEMAS[doc["command"]])


def to_json(doc: dict) -> str:
    return dumps(doc) + "\n"


# -- text ------------------------------------------------------------------------

def _scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if v is None:
        return "-"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _is_matrix(v) -> bool:
    return isinstance(v, list) and v and isinstance(v[0], list) and v[0] and isinstance(v[0][0], list)


def _lines(obj, indent: int):
    pad = "  " * indent
    if isinstance(obj, dict):
        for key, v in obj.items():
            if isinstance(v, (dict, list)) and v and not (isinstance(v, list) and not isinstance(v[0], (dict, list))):
                yield f"{pad}{key}:"
                yield from _lines(v, indent + 1)
            elif isinstance(v, list):
                yield f"{pad}{key}: [{', '.join(_scalar(x) for x in v)}]"
            else:
                yield f"{pad}{key}: {_scalar(v)}"
    elif _is_matrix(obj):
        for row in obj:
            yield pad + "  ".join(f"{re:+.17g}{im:+.17g}j" for re, im in row)
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, dict):
                sub = list(_lines(v, indent + 1))
                yield pad + "- " + sub[0].lstrip() if sub else pad + "-"
                yield from sub[1:]
            else:
                yield f"{pad}- {_scalar(v)}"
    else:
        yield pad + _scalar(obj)


def to_text(doc: dict) -> str:
    """Human-readable rendering of a report; every number comes from ``doc``."""
    head = [f"rsp-lab {doc['tool_version']}  {doc['command']}"]
    cfg = ", ".join(f"{k}={_scalar(v)}" for k, v in doc["config"].items() if not isinstance(v, dict))
    if cfg:
        head.append(f"config: {cfg}")
    return "\n".join(head + list(_lines(doc["result"], 0))) + "\n"
