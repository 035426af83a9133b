"""Structured pass/fail records for checked identities and inequalities."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, List, Optional


def _num(v):
    if isinstance(v, Fraction):
        return float(v)
    return v


def _jsonable(v):
    if isinstance(v, Fraction):
        return {"value": float(v), "exact": f"{v.numerator}/{v.denominator}"}
    return v


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    lhs: Any = None
    rhs: Any = None
    relation: str = ""
    tol: float = 0.0
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        if self.relation:
            body = f"{_num(self.lhs)!r} {self.relation} {_num(self.rhs)!r} (tol {self.tol:g})"
        else:
            body = self.detail
        if self.relation and self.detail:
            body += f"  [{self.detail}]"
        return f"{verdict}  {self.name}: {body}"

    def to_json(self) -> dict:
        return {
            "id": self.name,
            "left": _jsonable(self.lhs),
            "right": _jsonable(self.rhs),
            "relation": self.relation,
            "tolerance": self.tol,
            "verdict": "pass" if self.passed else "fail",
            "detail": self.detail,
        }


def _compare(lhs, rhs, relation, tol):
    exact = tol == 0 and not isinstance(lhs, float) and not isinstance(rhs, float)
    if exact:
        tol = 0
    else:
        lhs, rhs = float(lhs), float(rhs)
    if relation == "<=":
        return lhs <= rhs + tol
    if relation == ">=":
        return lhs + tol >= rhs
    if relation == "==":
        return abs(lhs - rhs) <= tol
    raise ValueError(f"unknown relation {relation!r}")


def holds(lhs, relation: str, rhs, tol: float = 0.0) -> bool:
    """Whether ``lhs relation rhs`` holds; exact for rationals when tol is 0."""
    return _compare(lhs, rhs, relation, tol)


@dataclass
class VerdictReport:
    """An ordered collection of :class:`Check` records.

    Comparisons with ``tol=0`` between rationals are exact.
    """

    title: str = ""
    checks: List[Check] = field(default_factory=list)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def compare(self, name, lhs, relation, rhs, tol=0.0, detail="") -> Check:
        return self.add(Check(name, _compare(lhs, rhs, relation, tol), lhs, rhs, relation, tol, detail))

    def le(self, name, lhs, rhs, tol=0.0, detail=""):
        return self.compare(name, lhs, "<=", rhs, tol, detail)

    def ge(self, name, lhs, rhs, tol=0.0, detail=""):
        return self.compare(name, lhs, ">=", rhs, tol, detail)

    def eq(self, name, lhs, rhs, tol=0.0, detail=""):
        return self.compare(name, lhs, "==", rhs, tol, detail)

    def flag(self, name, passed: bool, detail="") -> Check:
        return self.add(Check(name, bool(passed), detail=detail))

    def extend(self, other: "VerdictReport", prefix: str = "") -> None:
        for c in other.checks:
            self.add(Check(prefix + c.name, c.passed, c.lhs, c.rhs, c.relation, c.tol, c.detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Optional[Check]:
        for c in self.checks:
            if c.name == name:
                return c
        return None

    def sorted_checks(self) -> Iterable[Check]:
        return sorted(self.checks, key=lambda c: c.name)

    def lines(self) -> List[str]:
        return [c.line() for c in self.sorted_checks()]

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.sorted_checks()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def __bool__(self):  # guard against `if report:` meaning "passed"
        raise TypeError("use report.passed")
