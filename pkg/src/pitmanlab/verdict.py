"""Verdicts on single inequality instances.

A verdict compares ``lhs`` and ``rhs`` under a relation (``>=``, ``<=`` or
``==``). The oriented slack is ``lhs - rhs`` for ``>=`` and ``rhs - lhs`` for
``<=``; matrices use the smallest eigenvalue of the oriented difference, and
matrix equalities the signed eigenvalue of largest magnitude.

Status depends on what is being claimed:

* ``inequality``: fail when ``slack < -max(tol, 3u)``, pass otherwise;
* ``strict``: pass when ``slack > max(tol, 3u)``; when ``u > 0`` and
  ``|slack| < 3u`` the data cannot resolve the gap and the verdict is
  indeterminate; anything else fails;
* ``equality``: pass when ``|slack| <= max(tol, 3u)``, fail otherwise;
* ``probe``: informational, always indeterminate.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

KINDS = ("inequality", "strict", "equality", "probe")
RELATIONS = (">=", "<=", "==")


def _as_value(v):
    return np.asarray(v, dtype=float) if np.ndim(v) else float(v)


def oriented_slack(lhs, rhs, relation: str) -> float:
    diff = np.asarray(lhs, dtype=float) - np.asarray(rhs, dtype=float)
    if relation == "<=":
        diff = -diff
    if diff.ndim == 0:
        return float(diff)
    if diff.ndim != 2 or diff.shape[0] != diff.shape[1]:
        raise ShapeError("matrix verdicts need square matrices")
    eig = np.linalg.eigvalsh(0.5 * (diff + diff.T))
    if relation == "==":
        return float(eig[np.argmax(np.abs(eig))])
    return float(eig.min())


def decide(slack: float, uncertainty: float, tol: float, kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown verdict kind {kind!r}")
    noise = 3.0 * uncertainty
    bar = max(tol, noise)
    if kind == "probe":
        return "indeterminate"
    if kind == "inequality":
        return "fail" if slack < -bar else "pass"
    if kind == "equality":
        return "pass" if abs(slack) <= bar else "fail"
    if slack > bar:
        return "pass"
    if uncertainty > 0 and abs(slack) < noise:
        return "indeterminate"
    return "fail"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


@dataclass
class InequalityVerdict:
    name: str
    instance: dict
    lhs: float | np.ndarray
    rhs: float | np.ndarray
    slack: float
    uncertainty: float
    status: str
    kind: str = "inequality"
    relation: str = ">="
    tol: float = 1e-10
    detail: dict = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        name: str,
        instance: dict,
        lhs,
        rhs,
        *,
        relation: str = ">=",
        kind: str = "inequality",
        uncertainty: float = 0.0,
        tol: float = 1e-10,
        slack: float | None = None,
        **detail,
    ) -> "InequalityVerdict":
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        s = oriented_slack(lhs, rhs, relation) if slack is None else float(slack)
        u = float(uncertainty)
        status = decide(s, u, tol, kind)
        if u > 0:
            detail.setdefault("gap_to_noise", s / u)
        return cls(name, dict(instance), _as_value(lhs), _as_value(rhs), s, u, status, kind, relation, tol, detail)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def instance_hash(self) -> str:
        text = json.dumps(_jsonable(self.instance), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        return _jsonable(
            {
                "name": self.name,
                "instance": self.instance,
                "instance_hash": self.instance_hash,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "relation": self.relation,
                "kind": self.kind,
                "slack": self.slack,
                "uncertainty": self.uncertainty,
                "tol": self.tol,
                "status": self.status,
                "detail": self.detail,
            }
        )

    def csv_row(self) -> list[str]:
        def fmt(v):
            if np.ndim(v):
                return json.dumps(_jsonable(v), separators=(",", ":"))
            v = float(v)
            return repr(v) if math.isfinite(v) else str(v)

        return [
            self.name,
            self.instance_hash,
            fmt(self.lhs),
            fmt(self.rhs),
            fmt(self.slack),
            fmt(self.uncertainty),
            self.status,
        ]


CSV_HEADER = ["name", "instance_hash", "lhs", "rhs", "slack", "uncertainty", "status"]
