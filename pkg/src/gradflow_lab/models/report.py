"""Verification reports and pair-scan results."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..utils.helpers import format_table, json_ready


@dataclass(frozen=True)
class PairScanResult:
    """Worst pair of a doubled-variable scan."""

    margin: float
    x: Optional[List[float]]
    y: Optional[List[float]]
    pairs: int

    def location(self) -> Optional[List[List[float]]]:
        if self.x is None or self.y is None:
            return None
        return [self.x, self.y]


@dataclass(frozen=True)
class ModulusTable:
    """Concave nondecreasing majorant psi(s) of binned half-differences."""

    s: np.ndarray
    psi: np.ndarray
    bin_s: np.ndarray
    bin_values: np.ndarray

    def __call__(self, s: Any) -> np.ndarray:
        return np.interp(np.asarray(s, dtype=float), self.s, self.psi)

    def to_dict(self) -> Dict[str, Any]:
        return {"s": self.s, "psi": self.psi}


@dataclass
class ReportEntry:
    """Margin of one checkpoint (or one labelled diagnostic) against its tolerance."""

    margin: float
    tolerance: float
    time: Optional[float] = None
    label: Optional[str] = None
    location: Optional[Any] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        # NaN margins fail
        return bool(self.margin <= self.tolerance)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time": self.time,
            "label": self.label,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "location": self.location,
            "details": self.details,
        }


def _entry_label(entry: ReportEntry) -> str:
    if entry.label is not None:
        return entry.label
    return f"t={entry.time:.6g}" if entry.time is not None else "-"


@dataclass
class VerificationReport:
    """Outcome of one check: per-checkpoint margins, tolerance and provenance.

    A report passes exactly when every entry's margin is within its tolerance.
    """

    name: str
    entries: List[ReportEntry] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    @property
    def worst(self) -> Optional[ReportEntry]:
        if not self.entries:
            return None
        return max(self.entries, key=lambda e: e.margin - e.tolerance)

    def add(self, entry: ReportEntry) -> None:
        self.entries.append(entry)

    def to_dict(self) -> Dict[str, Any]:
        return json_ready(
            {
                "name": self.name,
                "params": self.params,
                "provenance": self.provenance,
                "entries": [entry.to_dict() for entry in self.entries],
                "pass": self.passed,
            }
        )

    def table(self) -> str:
        rows = [[_entry_label(e), e.margin, e.tolerance, e.passed] for e in self.entries]
        headers = ["checkpoint", "margin", "tolerance", "status"]
        return f"{self.name}\n" + format_table(rows, headers)
