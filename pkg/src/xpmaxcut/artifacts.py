"""Deterministic CSV/JSON output with embedded provenance."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence

from . import __version__

TOOL = "xpmaxcut"


def provenance(config: Mapping) -> dict:
    return {"tool": TOOL, "version": __version__, "config": dict(config)}


def _clean(value):
    # JSON has no inf/nan; keep them readable and parseable
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], config: Optional[Mapping] = None) -> Path:
    """CSV with a single leading ``# {provenance json}`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config is not None:
            fh.write("# " + json.dumps(_clean(provenance(config)), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path: Path) -> tuple:
    """``(provenance or None, rows as dicts of strings)``."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    meta = None
    body: List[str] = []
    for line in text:
        if line.startswith("#"):
            if meta is None:
                try:
                    meta = json.loads(line[1:].strip())
                except json.JSONDecodeError:
                    pass
            continue
        if line:
            body.append(line)
    return meta, list(csv.DictReader(body))


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
