"""Deterministic CSV emission with a reproducibility manifest header."""

from __future__ import annotations

import os
import sys
import tempfile
from dataclasses import dataclass, field


@dataclass
class RunManifest:
    command: str
    scenario: str = ""
    params: dict = field(default_factory=dict)
    output: str = ""

    def lines(self) -> list[str]:
        lines = [f"# numfeas {self.command}"]
        if self.scenario:
            lines.append(f"# scenario = {self.scenario}")
        for key, value in self.params.items():
            lines.append(f"# {key} = {value}")
        return lines


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render_csv(manifest: RunManifest, header: list[str], rows) -> str:
    out = manifest.lines()
    out.append(",".join(header))
    for row in rows:
        out.append(",".join(format_value(v) for v in row))
    return "\n".join(out) + "\n"


def write_text(path: str | None, text: str) -> None:
    """Write to path atomically (temp file + rename), or to stdout if None."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".numfeas-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
