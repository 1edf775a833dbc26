"""Verdict records shared by every check suite."""

from __future__ import annotations

from dataclasses import dataclass

PASS, FAIL, FLAG, UNSAT, SAT = "PASS", "FAIL", "FLAG", "UNSAT", "SAT"
STATUSES = (PASS, FAIL, FLAG, UNSAT, SAT)


@dataclass(frozen=True)
class Verdict:
    check: str
    status: str
    detail: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad verdict status {self.status!r}")

    @classmethod
    def of(cls, check: str, ok: bool, detail: str = "") -> Verdict:
        return cls(check, PASS if ok else FAIL, detail)

    @property
    def ok(self) -> bool:
        """Everything except FAIL counts as passing; FLAG is informational."""
        return self.status != FAIL

    def machine_line(self) -> str:
        line = f"VERDICT {self.check} {self.status}"
        return f"{line} {self.detail}" if self.detail else line
