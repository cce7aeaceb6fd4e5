"""Experiment reports: provenance, summary lines and the embedded scenario."""

from __future__ import annotations

import platform
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from .errors import ParseError

__all__ = ["ExperimentReport", "read_report_config", "CONFIG_BEGIN", "CONFIG_END"]

CONFIG_BEGIN = "--- scenario (canonical) ---"
CONFIG_END = "--- end scenario ---"


def _versions() -> dict:
    from . import __version__

    return {"mvsvi": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pyyaml": yaml.__version__, "python": platform.python_version()}


@dataclass
class ExperimentReport:
    name: str
    experiment: str
    config_hash: str
    seed: int
    canonical_config: str
    wall_time: float = 0.0
    lines: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    versions: dict = field(default_factory=_versions)
    ok: bool = True

    def add(self, line: str):
        self.lines.append(line)

    def render(self) -> str:
        head = [
            f"scenario: {self.name}",
            f"experiment: {self.experiment}",
            f"config_hash: {self.config_hash}",
            f"seed: {self.seed}",
            "stream_tags: particle_system=1 limit_process=2 picard_shared=3",
            "versions: " + " ".join(f"{k}={v}" for k, v in self.versions.items()),
            f"wall_time_s: {self.wall_time:.3f}",
            f"status: {'ok' if self.ok else 'failed checks'}",
            "tables: " + ", ".join(Path(t).name for t in self.tables),
            "",
            "results:",
        ]
        body = ["  " + ln for ln in self.lines]
        tail = ["", CONFIG_BEGIN, self.canonical_config.rstrip("\n"), CONFIG_END, ""]
        return "\n".join(head + body + tail)

    def write(self, directory) -> Path:
        path = Path(directory) / f"{self.name}.report.txt"
        path.write_text(self.render())
        return path


def read_report_config(path) -> tuple:
    """``(canonical config text, recorded hash)`` from a written report."""
    text = Path(path).read_text()
    m = re.search(re.escape(CONFIG_BEGIN) + r"\n(.*?)\n" + re.escape(CONFIG_END), text, re.S)
    h = re.search(r"^config_hash: (\w+)$", text, re.M)
    if not m or not h:
        raise ParseError(f"{path}: no embedded scenario found")
    return m.group(1) + "\n", h.group(1)
