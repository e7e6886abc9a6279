"""Diagnostic records and source spans."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True, order=True)
class SourceSpan:
    """Half-open character range; lines and columns are 1-based."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def to_dict(self) -> dict:
        return {
            "file": self.file,
            "startLine": self.start_line,
            "startCol": self.start_col,
            "endLine": self.end_line,
            "endCol": self.end_col,
        }

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


# Stable rule table.  Anything emitting a Diagnostic must use one of these ids.
RULES: dict[str, str] = {
    "PARSE-001": "syntax error",
    "PARSE-002": "duplicate name",
    "PARSE-003": "unknown reference",
    "MODEL-001": "model invariant violated",
    "FLOW-001": "illegal intra-thimac flow",
    "FLOW-002": "illegal inter-thimac flow",
    "FLOW-003": "transfer port used in the wrong direction",
    "FLOW-004": "flow arc endpoint does not exist",
    "FLOW-005": "duplicate flow arc",
    "FLOW-007": "transfer(in) flows straight to process, skipping receive",
    "TRIG-001": "trigger must target a create or process stage",
    "TRIG-002": "decreate trigger must target a create stage",
    "TRIG-003": "trigger arc endpoint does not exist",
    "STG-001": "stage is unreachable",
    "EVT-001": "region references an unknown stage",
    "EVT-002": "region is not weakly connected",
    "EVT-003": "composite sub-events overlap",
    "EVT-004": "composite event needs at least two sub-events",
    "EVT-005": "composite region differs from the union of its parts",
    "EVT-006": "instant duration requires a single create stage",
    "EVT-007": "region is empty",
    "EVT-008": "unknown sub-event",
    "CHR-001": "repeat edges must be reflexive and reflexive edges must be repeat edges",
    "CHR-002": "edge endpoint is not a chronology event",
    "CHR-003": "branch group is malformed",
    "CHR-004": "succession edge belongs to several branch groups",
    "CHR-005": "event unreachable from every source",
    "CHR-006": "fork is not covered by a single branch group",
    "CHR-007": "chronology event is not declared",
    "REC-001": "recurrence count below two",
    "REC-002": "recurrence interval must be positive",
    "REC-003": "recurrence references an unknown event",
    "CONF-001": "consecutive trace events are not connected",
    "CONF-002": "trace ticks break the boundary rule",
    "CONF-003": "trace mixes alternatives of one branch group",
    "CONF-004": "trace event is not part of the chronology",
}


@dataclass(frozen=True)
class Diagnostic:
    rule_id: str
    severity: Severity
    message: str
    location: SourceSpan | str = ""

    def __post_init__(self):
        if self.rule_id not in RULES:
            raise ValueError(f"undocumented rule id {self.rule_id!r}")

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def to_dict(self) -> dict:
        loc = self.location.to_dict() if isinstance(self.location, SourceSpan) else {"path": self.location}
        return {
            "ruleId": self.rule_id,
            "severity": self.severity.value,
            "message": self.message,
            "location": loc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __str__(self) -> str:
        return f"{self.location}: {self.severity.value} {self.rule_id}: {self.message}"


def error(rule: str, message: str, location: SourceSpan | str = "") -> Diagnostic:
    return Diagnostic(rule, Severity.ERROR, message, location)


def warning(rule: str, message: str, location: SourceSpan | str = "") -> Diagnostic:
    return Diagnostic(rule, Severity.WARNING, message, location)


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)
