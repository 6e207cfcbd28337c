"""Checkpoint/resume for long runs.

A checkpoint is a JSON document holding the canonical config, its hash,
and the finished chunks' outcome rows.  Resuming verifies the hash and
recomputes only the missing chunks; the final outputs are byte-identical
to an uninterrupted run because rows are pure per-replica values.
"""

from __future__ import annotations

import json
import os

CHECKPOINT_MAGIC = "bbmlab-checkpoint v1"


class CheckpointMismatch(RuntimeError):
    """Checkpoint belongs to a different experiment config."""


def save_checkpoint(path: str, cfg_dict: dict, cfg_hash: str, done: dict[int, list]) -> None:
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "config_hash": cfg_hash,
        "config": cfg_dict,
        "chunks": {str(k): v for k, v in done.items()},
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(payload, f)
    os.replace(tmp, path)


def load_checkpoint(path: str, expect_hash: str | None = None):
    with open(path) as f:
        payload = json.load(f)
    if payload.get("magic") != CHECKPOINT_MAGIC:
        raise CheckpointMismatch(f"not a {CHECKPOINT_MAGIC} file: {path}")
    if expect_hash is not None and payload["config_hash"] != expect_hash:
        raise CheckpointMismatch(
            f"checkpoint config hash {payload['config_hash']} != expected {expect_hash}"
        )
    chunks = {int(k): v for k, v in payload["chunks"].items()}
    return payload["config"], payload["config_hash"], chunks
