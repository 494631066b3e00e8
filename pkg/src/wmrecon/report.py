"""The reconstructed WM map and its JSON document form."""

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Tuple

REPORT_FORMAT = "wmrecon-report"
REPORT_VERSION = 1


def source_digest(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ReportEntry:
    name: str
    span: Tuple[int, int, int]
    kind: str                   # "Simple" or "Compound"
    label: str                  # l*, "" for epsilon
    info: Tuple[str, ...]
    open_event: int
    close_event: int
    synthetic: bool = False
    compressed: Optional[str] = None

    @property
    def is_epsilon(self):
        return self.label == ""

    def to_dict(self):
        d = {
            "name": self.name,
            "span": list(self.span),
            "kind": self.kind,
            "label": self.label,
            "info": list(self.info),
            "open_event": self.open_event,
            "close_event": self.close_event,
            "synthetic": self.synthetic,
        }
        if self.compressed is not None:
            d["compressed"] = self.compressed
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], tuple(d["span"]), d["kind"], d["label"], tuple(d["info"]),
                   d["open_event"], d["close_event"], d.get("synthetic", False),
                   d.get("compressed"))


@dataclass(frozen=True)
class WMReport:
    source_sha256: Optional[str]
    outcome: str
    error: Optional[str]
    event_count: int
    config: dict
    entries: Tuple[ReportEntry, ...]
    warnings: Tuple[str, ...] = ()

    def labels(self):
        """Candidate name to l*."""
        return {e.name: e.label for e in self.entries}

    def entry(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def summary(self):
        eps = sum(1 for e in self.entries if e.is_epsilon)
        return {"candidates": len(self.entries), "labelled": len(self.entries) - eps,
                "epsilon": eps, "distinct_labels": len({e.label for e in self.entries})}

    def to_dict(self):
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "source_sha256": self.source_sha256,
            "outcome": self.outcome,
            "error": self.error,
            "event_count": self.event_count,
            "config": self.config,
            "summary": self.summary(),
            "warnings": list(self.warnings),
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != REPORT_FORMAT or d.get("version") != REPORT_VERSION:
            raise ValueError("not a wmrecon report")
        return cls(d["source_sha256"], d["outcome"], d["error"], d["event_count"], d["config"],
                   tuple(ReportEntry.from_dict(e) for e in d["entries"]), tuple(d["warnings"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def write_report(path, report):
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(report.to_json())
