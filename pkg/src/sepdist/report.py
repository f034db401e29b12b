"""Report data model and its JSON / text renderings.

JSON is canonical: keys keep insertion order, floats are rounded to 12
significant digits, and nothing time- or host-dependent is recorded, so
the same run configuration always renders to the same bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .certificates import CertificateReport
from .checks import Check
from .qudit import Outcome

SCHEMA_VERSION = "sepdist-report/1"


@dataclass
class Report:
    command: str
    config: dict[str, Any]
    tolerance: float
    checks: list[Check] = field(default_factory=list)
    certificates: list[CertificateReport] = field(default_factory=list)
    outcome_tables: list[dict[str, Any]] = field(default_factory=list)
    success_probability: float | None = None
    results: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    runs: list[Report] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            all(c.passed for c in self.checks)
            and all(c.ok for c in self.certificates)
            and all(r.ok for r in self.runs)
        )

    @property
    def status(self) -> str:
        return "pass" if self.ok else "fail"


def outcome_table(measured, outcomes: list[Outcome]) -> dict[str, Any]:
    return {
        "measured": list(measured),
        "outcomes": [
            {"outcome": o.outcome, "probability": o.probability, "has_post_state": o.post_state is not None}
            for o in outcomes
        ],
        "total_probability": sum(o.probability for o in outcomes),
    }


def check_dict(c: Check) -> dict[str, Any]:
    return {
        "equation": c.equation,
        "description": c.description,
        "value": c.value,
        "tolerance": c.tolerance,
        "passed": c.passed,
    }


def certificate_dict(c: CertificateReport) -> dict[str, Any]:
    return {
        "target": c.target,
        "decompositions": [
            {
                "name": d.name,
                "cut": d.cut,
                "provenance": d.provenance,
                "terms": d.n_terms,
                "max_deviation": d.max_deviation,
                "weight_error": d.weight_error,
                "verified": d.ok,
            }
            for d in c.decompositions
        ],
        "transports": list(c.transports),
        "ppt": [{"cut": p.cut, "min_eigenvalue": p.min_eigenvalue, "passed": p.passed} for p in c.ppt],
        "verdicts": dict(c.verdicts),
    }


def report_dict(r: Report) -> dict[str, Any]:
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "command": r.command,
        "status": r.status,
        "config": r.config,
        "tolerance": r.tolerance,
        "checks": [check_dict(c) for c in r.checks],
        "certificates": [certificate_dict(c) for c in r.certificates],
        "outcome_tables": r.outcome_tables,
        "success_probability": r.success_probability,
        "results": r.results,
        "notes": list(r.notes),
    }
    if r.runs:
        out["runs"] = [report_dict(sub) for sub in r.runs]
    return out


def _round(x: float) -> float:
    if not math.isfinite(x):
        return x
    y = float(f"{x:.12g}")
    return 0.0 if y == 0 else y


def _canonical(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return _round(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return _canonical(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_json(r: Report) -> str:
    return json.dumps(_canonical(report_dict(r)), indent=2) + "\n"


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.4g}"
    return str(x)


def render_text(r: Report, indent: str = "") -> str:
    lines = [f"{indent}== {r.command} {_config_line(r.config)} :: {r.status.upper()}"]
    if r.checks:
        w = max(len(c.equation) for c in r.checks)
        lines.append(f"{indent}  {'check'.ljust(w)}  {'value':>11}  {'tol':>8}  result")
        for c in r.checks:
            mark = "ok" if c.passed else "FAIL"
            lines.append(f"{indent}  {c.equation.ljust(w)}  {c.value:>11.3e}  {c.tolerance:>8.1e}  {mark}")
    for cert in r.certificates:
        verdicts = ", ".join(f"{cut}: {v}" for cut, v in cert.verdicts.items())
        lines.append(f"{indent}  certificate {cert.target}: {verdicts}")
        for d in cert.decompositions:
            lines.append(
                f"{indent}    {d.cut:<24} {d.provenance:<32} terms={d.n_terms:<4} "
                f"dev={d.max_deviation:.2e} {'verified' if d.ok else 'NOT VERIFIED'}"
            )
    for table in r.outcome_tables:
        cells = " ".join(f"{o['outcome']}:{o['probability']:.6f}" for o in table["outcomes"])
        lines.append(f"{indent}  outcomes on {','.join(table['measured'])}: {cells}")
    if r.success_probability is not None:
        lines.append(f"{indent}  success probability: {r.success_probability:.12g}")
    for key, value in r.results.items():
        lines.append(f"{indent}  {key}: {_fmt(value)}")
    for note in r.notes:
        lines.append(f"{indent}  note: {note}")
    for sub in r.runs:
        lines.append(render_text(sub, indent + "  ").rstrip("\n"))
    return "\n".join(lines) + "\n"


def _config_line(config: dict) -> str:
    return " ".join(f"{k}={_fmt(v)}" for k, v in config.items() if v is not None)


def render_report(r: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return render_json(r).encode()
    if fmt == "text":
        return render_text(r).encode()
    raise ValueError(f"unknown format {fmt!r}")
