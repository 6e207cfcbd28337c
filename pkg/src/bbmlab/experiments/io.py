"""Deterministic CSV/JSON persistence for experiment outputs.

Numbers are serialized with full round-trip precision (shortest repr),
so identical outcomes always produce byte-identical files regardless of
worker count or resume history.
"""

from __future__ import annotations

import json
import os
from typing import Any, Iterable

import numpy as np

OUTCOMES_VERSION = "bbmlab-outcomes v1"
ESTIMATES_VERSION = "bbmlab-estimates v1"


def fmt_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def parse_cell(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_outcomes(path: str, mode: str, cfg_hash: str, columns: list[str], rows: Iterable[list]) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# {OUTCOMES_VERSION}, mode={mode}, config={cfg_hash}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(fmt_cell(v) for v in row) + "\n")


def read_outcomes(path: str) -> tuple[dict, list[str], list[list]]:
    with open(path) as f:
        header = f.readline().strip()
        meta = {}
        for part in header.lstrip("# ").split(", "):
            if "=" in part:
                k, v = part.split("=", 1)
                meta[k] = v
        columns = f.readline().strip().split(",")
        rows = [[parse_cell(c) for c in line.rstrip("\n").split(",")] for line in f if line.strip()]
    return meta, columns, rows


ESTIMATE_COLUMNS = ["estimand", "value", "ci_low", "ci_high", "n_used", "n_censored", "note"]


def write_estimates(path: str, cfg_hash: str, rows: Iterable[list]) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# {ESTIMATES_VERSION}, config={cfg_hash}\n")
        f.write(",".join(ESTIMATE_COLUMNS) + "\n")
        for row in rows:
            f.write(",".join(fmt_cell(v) for v in row) + "\n")


def read_estimates(path: str) -> list[dict]:
    with open(path) as f:
        f.readline()
        columns = f.readline().strip().split(",")
        out = []
        for line in f:
            if not line.strip():
                continue
            out.append(dict(zip(columns, (parse_cell(c) for c in line.rstrip("\n").split(",")))))
    return out


def write_run_metadata(path: str, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
