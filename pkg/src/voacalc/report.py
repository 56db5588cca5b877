"""Check results and deterministic report assembly."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class CheckResult:
    check: str
    subject: str
    status: str  # "pass" | "fail" | "skip"
    residual: Optional[float] = None
    exact: bool = False
    details: str = ""
    seconds: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def as_dict(self) -> dict:
        out = {"check": self.check, "subject": self.subject, "status": self.status,
               "residual": self.residual}
        if self.exact:
            out["exact"] = True
        if self.details:
            out["details"] = self.details
        if self.seconds is not None:
            out["seconds"] = round(self.seconds, 4)
        return out


class Report:
    """Ordered collection of check results."""

    def __init__(self, title: str = ""):
        self.title = title
        self.results: list[CheckResult] = []

    def add(self, result: CheckResult | list[CheckResult]):
        if isinstance(result, list):
            self.results.extend(result)
        else:
            self.results.append(result)
        return self

    def timed(self, fn, *args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        items = res if isinstance(res, list) else [res]
        for item in items:
            if item.seconds is None:
                item.seconds = dt / len(items)
        self.add(res)
        return res

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if r.status == "fail"]

    def sorted_results(self) -> list[CheckResult]:
        return sorted(self.results, key=lambda r: (r.check, r.subject))

    def to_json(self, ordered: bool = True) -> str:
        rows = self.sorted_results() if ordered else self.results
        return json.dumps([r.as_dict() for r in rows], indent=1, sort_keys=True)

    def summary_lines(self) -> list[str]:
        lines = []
        for r in self.sorted_results():
            res = "exact" if (r.exact and r.status == "pass") else (
                f"residual={r.residual:.3g}" if r.residual is not None else "")
            lines.append(f"[{r.status.upper():4s}] {r.check} :: {r.subject} {res}".rstrip())
        return lines


def passfail(check: str, subject: str, ok: bool, residual=None, exact=False,
             details: str = "") -> CheckResult:
    return CheckResult(check, subject, "pass" if ok else "fail",
                       None if residual is None else float(residual), exact, details)
