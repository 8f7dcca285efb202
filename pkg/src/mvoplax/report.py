"""Named residual reports with per-identity tolerance verdicts."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import linalg


def tolerance_scale() -> float:
    """Global tolerance multiplier, from MVOP_TOL_SCALE (default 1)."""
    return float(os.environ.get("MVOP_TOL_SCALE", "1"))


@dataclass
class ResidualEntry:
    identity: str
    abs_residual: float
    rel_residual: float
    tolerance: float
    passed: bool
    skipped: bool = False
    note: str = ""
    n: int | None = None
    s: float | None = None
    suite: str = ""

    def row(self) -> list:
        return [self.suite, self.n, self.s, self.identity,
                self.abs_residual, self.rel_residual, self.tolerance,
                "skip" if self.skipped else ("pass" if self.passed else "FAIL")]


@dataclass
class ResidualReport:
    """Ordered collection of identity residuals plus evaluation context."""

    context: dict = field(default_factory=dict)
    entries: list[ResidualEntry] = field(default_factory=list)

    def check(self, identity: str, delta, reference, tolerance: float,
              *, n: int | None = None, s: float | None = None,
              suite: str = "", note: str = "") -> ResidualEntry:
        """Record ``||delta||`` against ``tolerance`` relative to ``reference``."""
        absr = linalg.frob(np.atleast_2d(np.asarray(delta)))
        relr = linalg.rel_residual(absr, np.atleast_2d(np.asarray(reference)))
        tol = tolerance * tolerance_scale()
        entry = ResidualEntry(identity, absr, relr, tol, bool(relr <= tol),
                              n=n, s=s, suite=suite, note=note)
        self.entries.append(entry)
        return entry

    def record(self, identity: str, abs_residual: float, rel_residual: float,
               tolerance: float, *, n: int | None = None, s: float | None = None,
               suite: str = "", note: str = "") -> ResidualEntry:
        """Record a residual with an externally computed normalization."""
        tol = tolerance * tolerance_scale()
        entry = ResidualEntry(identity, float(abs_residual), float(rel_residual),
                              tol, bool(rel_residual <= tol), n=n, s=s,
                              suite=suite, note=note)
        self.entries.append(entry)
        return entry

    def skip(self, identity: str, note: str, *, n: int | None = None,
             s: float | None = None, suite: str = "") -> ResidualEntry:
        entry = ResidualEntry(identity, 0.0, 0.0, 0.0, True, skipped=True,
                              note=note, n=n, s=s, suite=suite)
        self.entries.append(entry)
        return entry

    def extend(self, other: "ResidualReport") -> None:
        self.entries.extend(other.entries)

    def __getitem__(self, identity: str) -> ResidualEntry:
        for e in self.entries:
            if e.identity == identity:
                return e
        raise KeyError(identity)

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def max_rel(self, prefix: str = "") -> float:
        vals = [e.rel_residual for e in self.entries
                if not e.skipped and e.identity.startswith(prefix)]
        return max(vals) if vals else 0.0

    def failures(self) -> list[ResidualEntry]:
        return [e for e in self.entries if not e.skipped and not e.passed]

    def sorted_entries(self) -> list[ResidualEntry]:
        return sorted(self.entries,
                      key=lambda e: (e.suite, e.n if e.n is not None else -1,
                                     e.identity, e.s if e.s is not None else -1.0))

    def to_json(self) -> str:
        return json.dumps({
            "context": self.context,
            "entries": [vars(e) for e in self.sorted_entries()],
        }, indent=2, default=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["suite", "n", "s", "identity", "abs_residual",
                         "rel_residual", "tolerance", "pass"])
        for e in self.sorted_entries():
            writer.writerow(e.row())
        return buf.getvalue()
