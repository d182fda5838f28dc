"""Verification reports shared by every checker in the package.

A report is an ordered list of checks.  Each check records the largest
residual it saw, the tolerance it was held to, and a short label naming the
axiom or property it exercises (``"M3"``, ``"EP5"``, ``"Tr3"``...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable


@dataclass
class Check:
    name: str
    label: str
    residual: float
    tolerance: float
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        out = {
            "name": self.name,
            "paper_label": self.label,
            "max_residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }
        if self.details:
            out["details"] = self.details
        return out


@dataclass
class Report:
    title: str
    checks: list[Check] = field(default_factory=list)

    def add(
        self,
        name: str,
        label: str,
        residual: float,
        tolerance: float,
        **details: Any,
    ) -> Check:
        check = Check(name, label, float(residual), float(tolerance), dict(details))
        self.checks.append(check)
        return check

    def extend(self, other: "Report | Iterable[Check]", prefix: str = "") -> None:
        checks = other.checks if isinstance(other, Report) else other
        for c in checks:
            self.checks.append(
                Check(prefix + c.name, c.label, c.residual, c.tolerance, dict(c.details))
            )

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self) -> Check | None:
        for c in self.checks:
            if not c.passed:
                return c
        return None

    def by_label(self, label: str) -> list[Check]:
        return [c for c in self.checks if c.label == label]

    def max_residual(self, label: str | None = None) -> float:
        vals = [c.residual for c in self.checks if label is None or c.label == label]
        return max(vals, default=0.0)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }

    def summary(self) -> str:
        lines = [f"{self.title}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            flag = "ok  " if c.passed else "FAIL"
            lines.append(f"  [{flag}] {c.label:<5} {c.name}  residual={c.residual:.3e}")
        return "\n".join(lines)
