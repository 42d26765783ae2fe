"""Canonical serialisation of experiment reports.

JSON: sorted keys, floats with 17 significant digits, no whitespace variation.
CSV: shortest round-trip floats, preceded by a ``# seed=... config_sha256=...`` line.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = ["Verdict", "ExperimentReport", "canonical_json", "format_float", "csv_text", "config_sha256"]


@dataclass
class Verdict:
    name: str
    criterion: str
    passed: bool
    statistic: float
    threshold: float
    relation: str = "<="

    def as_dict(self):
        return {"name": self.name, "criterion": self.criterion, "passed": bool(self.passed),
                "statistic": self.statistic, "threshold": self.threshold,
                "relation": self.relation}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int
    config_hash: str
    results: dict
    verdicts: list = field(default_factory=list)
    paths: list = field(default_factory=list)   # (replication, t, value) rows, not in JSON
    backend: str = ""

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def as_dict(self):
        return {
            "experiment": self.experiment,
            "config": self.config,
            "provenance": {"seed": self.seed, "config_sha256": self.config_hash},
            "results": self.results,
            "verdicts": [v.as_dict() for v in self.verdicts],
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return canonical_json(self.as_dict())

    def summary_rows(self):
        return [(v.name, v.criterion, v.relation, v.statistic, v.threshold, v.passed)
                for v in self.verdicts]


def format_float(x: float, digits: int = 17) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, f".{digits}g")


def _encode(obj: Any) -> str:
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    return _encode(obj) + "\n"


def config_sha256(resolved: dict) -> str:
    """Hash of the resolved configuration in its canonical JSON form."""
    return hashlib.sha256(canonical_json(resolved).encode("ascii")).hexdigest()


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], seed: int, config_hash: str) -> str:
    lines = [f"# seed={seed} config_sha256={config_hash}", ",".join(header)]
    lines.extend(",".join(_csv_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_outputs(report: ExperimentReport, out_dir: Path, force: bool = False,
                  extra: dict | None = None) -> list[Path]:
    """Write ``report.json``, ``summary.csv`` and (if any paths) ``paths.csv``."""
    out_dir = Path(out_dir)
    files = {
        "report.json": report.to_json(),
        "summary.csv": csv_text(("verdict", "criterion", "relation", "statistic", "threshold", "passed"),
                                report.summary_rows(), report.seed, report.config_hash),
    }
    if report.paths:
        files["paths.csv"] = csv_text(("replication", "t", "value"), report.paths,
                                      report.seed, report.config_hash)
    files.update(extra or {})
    targets = [out_dir / name for name in files]
    clash = [p for p in targets if p.exists()]
    if clash and not force:
        raise FileExistsError(f"refusing to overwrite {', '.join(map(str, clash))} (use --force)")
    out_dir.mkdir(parents=True, exist_ok=True)
    for p in targets:
        p.write_text(files[p.name], encoding="ascii")
    return targets
