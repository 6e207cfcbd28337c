"""Experiment configuration: schema, validation, canonical hashing.

Configs are plain nested key-value documents (YAML on disk).  Every
validation error names the offending field path.  The canonical hash
covers exactly the fields that determine outcomes, so resumed or
re-parallelized runs can prove they are the same experiment.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import yaml

MODES = ("free", "confined", "obstacle", "clearing_scan", "clearing_hit")


class ConfigError(ValueError):
    """Invalid experiment config; the message carries the field path."""


@dataclass(frozen=True)
class RadiusSpec:
    form: str = "constant"
    c: float = 1.0
    alpha: float = 0.4
    p: float = 1.0
    r0: float = 1.0


@dataclass(frozen=True)
class LDKnobs:
    m_min: int = 32
    margin_c: float = 5.0
    cap: int = 2048
    check_dt: float = 0.1


@dataclass(frozen=True)
class ClearingKnobs:
    rho: float = 2.0
    resolution: float = 0.025
    half_width: float = 50.0
    n_envs: int = 1000
    paths_per_env: int = 2
    t_end: float = 1000.0
    step: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    dim: int = 1
    seed: int = 0
    replicas: int = 1
    chunk_size: int = 4096
    beta: float = 1.0
    beta_bar: float = 0.0
    nu: float = 1.0
    trap_radius: float = 0.5
    env_seed: int = 0
    env_file: str | None = None
    box_half_width: float | None = None
    times: tuple[float, ...] = (1.0,)
    step: float = 1e-3
    cap: int = 10**7
    count_only: bool = False
    radius: RadiusSpec = field(default_factory=RadiusSpec)
    kappa: float | None = None
    r_grid: tuple[float, ...] | None = None
    ld: LDKnobs = field(default_factory=LDKnobs)
    clearing: ClearingKnobs = field(default_factory=ClearingKnobs)


def _get(d: dict, key: str, path: str, kind, default=None, required=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}{key}: required field missing")
        return default
    v = d[key]
    try:
        if kind is float:
            return float(v)
        if kind is int:
            if isinstance(v, float) and not v.is_integer():
                raise ValueError
            return int(v)
        if kind is bool:
            if not isinstance(v, bool):
                raise ValueError
            return v
        if kind is str:
            if not isinstance(v, str):
                raise ValueError
            return v
    except (TypeError, ValueError):
        raise ConfigError(f"{path}{key}: expected {kind.__name__}, got {v!r}")
    return v


def _times(d: dict, path: str) -> tuple[float, ...]:
    raw = d.get("times", [1.0])
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError(f"{path}times: expected a nonempty list")
    try:
        ts = tuple(float(v) for v in raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}times: entries must be numbers")
    if any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ConfigError(f"{path}times: must be positive and strictly increasing")
    return ts


def config_from_dict(doc: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError(": config document must be a mapping")
    mode = _get(doc, "mode", "", str, required=True)
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}, got {mode!r}")

    dim = _get(doc, "dim", "", int, default=1)
    if not 1 <= dim <= 10:
        raise ConfigError(f"dim: must be in 1..10, got {dim}")
    replicas = _get(doc, "replicas", "", int, default=1)
    if replicas < 1:
        raise ConfigError(f"replicas: must be >= 1, got {replicas}")
    beta = _get(doc, "beta", "", float, default=1.0)
    if beta <= 0:
        raise ConfigError(f"beta: must be > 0, got {beta}")
    beta_bar = _get(doc, "beta_bar", "", float, default=0.0)
    times = _times(doc, "")
    step = _get(doc, "step", "", float, default=1e-3)
    if step <= 0:
        raise ConfigError(f"step: must be > 0, got {step}")
    cap = _get(doc, "cap", "", int, default=10**7)
    if cap < 1:
        raise ConfigError(f"cap: must be >= 1, got {cap}")

    rdoc = doc.get("radius", {}) or {}
    form = _get(rdoc, "form", "radius.", str, default="constant")
    if form not in ("power", "log_power", "constant"):
        raise ConfigError(f"radius.form: unknown form {form!r}")
    alpha = _get(rdoc, "alpha", "radius.", float, default=0.4)
    if form == "power" and not 0.0 < alpha < 0.5:
        raise ConfigError(f"radius.alpha: power form needs 0 < alpha < 1/2, got {alpha}")
    radius = RadiusSpec(
        form=form,
        c=_get(rdoc, "c", "radius.", float, default=1.0),
        alpha=alpha,
        p=_get(rdoc, "p", "radius.", float, default=1.0 / dim),
        r0=_get(rdoc, "r0", "radius.", float, default=1.0),
    )

    kappa = _get(doc, "kappa", "", float)
    if kappa is not None and kappa <= 0:
        raise ConfigError(f"kappa: must be > 0, got {kappa}")

    r_grid = None
    if doc.get("r_grid") is not None:
        try:
            r_grid = tuple(float(v) for v in doc["r_grid"])
        except (TypeError, ValueError):
            raise ConfigError("r_grid: entries must be numbers")
        if any(b <= a for a, b in zip(r_grid, r_grid[1:])) or not r_grid:
            raise ConfigError("r_grid: must be nonempty strictly ascending")

    lddoc = doc.get("ld", {}) or {}
    ld = LDKnobs(
        m_min=_get(lddoc, "m_min", "ld.", int, default=32),
        margin_c=_get(lddoc, "margin_c", "ld.", float, default=5.0),
        cap=_get(lddoc, "cap", "ld.", int, default=2048),
        check_dt=_get(lddoc, "check_dt", "ld.", float, default=0.1),
    )

    cdoc = doc.get("clearing", {}) or {}
    clearing = ClearingKnobs(
        rho=_get(cdoc, "rho", "clearing.", float, default=2.0),
        resolution=_get(cdoc, "resolution", "clearing.", float, default=0.025),
        half_width=_get(cdoc, "half_width", "clearing.", float, default=50.0),
        n_envs=_get(cdoc, "n_envs", "clearing.", int, default=1000),
        paths_per_env=_get(cdoc, "paths_per_env", "clearing.", int, default=2),
        t_end=_get(cdoc, "t_end", "clearing.", float, default=1000.0),
        step=_get(cdoc, "step", "clearing.", float, default=0.05),
    )

    cfg = ExperimentConfig(
        mode=mode,
        dim=dim,
        seed=_get(doc, "seed", "", int, default=0),
        replicas=replicas,
        chunk_size=_get(doc, "chunk_size", "", int, default=4096),
        beta=beta,
        beta_bar=beta_bar,
        nu=_get(doc, "nu", "", float, default=1.0),
        trap_radius=_get(doc, "trap_radius", "", float, default=0.5),
        env_seed=_get(doc, "env_seed", "", int, default=0),
        env_file=_get(doc, "env_file", "", str),
        box_half_width=_get(doc, "box_half_width", "", float),
        times=times,
        step=step,
        cap=cap,
        count_only=_get(doc, "count_only", "", bool, default=False),
        radius=radius,
        kappa=kappa,
        r_grid=r_grid,
        ld=ld,
        clearing=clearing,
    )
    _validate_mode(cfg)
    return cfg


def _validate_mode(cfg: ExperimentConfig) -> None:
    if cfg.chunk_size < 1:
        raise ConfigError(f"chunk_size: must be >= 1, got {cfg.chunk_size}")
    if cfg.mode == "obstacle":
        if not 0.0 <= cfg.beta_bar < cfg.beta:
            raise ConfigError(
                f"beta_bar: need 0 <= beta_bar < beta, got {cfg.beta_bar} vs beta={cfg.beta}"
            )
        if cfg.nu < 0:
            raise ConfigError(f"nu: must be >= 0, got {cfg.nu}")
        if cfg.trap_radius <= 0:
            raise ConfigError(f"trap_radius: must be > 0, got {cfg.trap_radius}")
        t_max = cfg.times[-1]
        need = math.sqrt(2.0 * cfg.beta) * t_max + 6.0 * math.sqrt(t_max)
        if cfg.env_file is None:
            if cfg.box_half_width is None:
                raise ConfigError("box_half_width: required for obstacle mode")
            if cfg.box_half_width < need:
                raise ConfigError(
                    f"box_half_width: must be >= sqrt(2 beta) t + 6 sqrt(t) = {need:.3f}, "
                    f"got {cfg.box_half_width}"
                )
    if cfg.mode == "confined":
        if cfg.kappa is not None and cfg.dim != 1:
            raise ConfigError("kappa: LD event estimation is implemented for dim=1")
    if cfg.mode in ("clearing_scan", "clearing_hit"):
        c = cfg.clearing
        if c.rho <= 0:
            raise ConfigError(f"clearing.rho: must be > 0, got {c.rho}")
        if c.resolution <= 0 or c.resolution > cfg.trap_radius / 2:
            raise ConfigError(
                f"clearing.resolution: must be in (0, trap_radius/2], got {c.resolution}"
            )
        if c.n_envs < 1:
            raise ConfigError(f"clearing.n_envs: must be >= 1, got {c.n_envs}")


def load_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        doc = yaml.safe_load(f)
    return config_from_dict(doc)


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    """Canonical plain-dict form (what the hash covers)."""
    return {
        "mode": cfg.mode,
        "dim": cfg.dim,
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "chunk_size": cfg.chunk_size,
        "beta": cfg.beta,
        "beta_bar": cfg.beta_bar,
        "nu": cfg.nu,
        "trap_radius": cfg.trap_radius,
        "env_seed": cfg.env_seed,
        "env_file": cfg.env_file,
        "box_half_width": cfg.box_half_width,
        "times": list(cfg.times),
        "step": cfg.step,
        "cap": cfg.cap,
        "count_only": cfg.count_only,
        "radius": {
            "form": cfg.radius.form,
            "c": cfg.radius.c,
            "alpha": cfg.radius.alpha,
            "p": cfg.radius.p,
            "r0": cfg.radius.r0,
        },
        "kappa": cfg.kappa,
        "r_grid": None if cfg.r_grid is None else list(cfg.r_grid),
        "ld": {
            "m_min": cfg.ld.m_min,
            "margin_c": cfg.ld.margin_c,
            "cap": cfg.ld.cap,
            "check_dt": cfg.ld.check_dt,
        },
        "clearing": {
            "rho": cfg.clearing.rho,
            "resolution": cfg.clearing.resolution,
            "half_width": cfg.clearing.half_width,
            "n_envs": cfg.clearing.n_envs,
            "paths_per_env": cfg.clearing.paths_per_env,
            "t_end": cfg.clearing.t_end,
            "step": cfg.clearing.step,
        },
    }


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
