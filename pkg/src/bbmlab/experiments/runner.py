"""Deterministic chunked execution of experiments.

Replica i's outcome row is a pure function of (seed, i, env_seed,
config): every particle substream is counter-addressed, so chunking,
worker count, and interruption history cannot change any value.  Chunks
are dispatched to a process pool and reassembled in index order; the
written CSVs are byte-identical for any worker count, and a resumed run
completes to the same bytes as an uninterrupted one.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import __version__, theory
from ..engine import (
    LDEventSpec,
    ObstacleBranchSpec,
    RadiusFunction,
    sample_yule_counts,
    simulate_batch,
)
from ..environment import (
    build_trap_field,
    good_point_hit,
    largest_clearing,
    load_trap_field,
    save_trap_field,
    trap_field_from_seed,
)
from ..kernels import Box, RngStream
from . import io as eio
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_from_dict, config_hash, config_to_dict
from .estimators import (
    HorizonStat,
    estimate_growth_exponent,
    estimate_ld_rate,
    mean_interval,
    wilson_interval,
)


@dataclass(frozen=True)
class RunPaths:
    out_dir: str
    outcomes: str
    estimates: str
    run_meta: str


def radius_fn_from_spec(cfg: ExperimentConfig) -> RadiusFunction:
    r = cfg.radius
    return RadiusFunction(form=r.form, c=r.c, alpha=r.alpha, p=r.p, r0=r.r0)


def ld_log_threshold(cfg: ExperimentConfig, t: float) -> tuple[float, str]:
    """log(gamma_t p_t e^{beta t}) and which p_t evaluation was used."""
    r = radius_fn_from_spec(cfg)(t)
    lp = theory.log_confinement_probability(r, t, dim=cfg.dim)
    kind = "asymptotic" if lp.asymptotic else "exact-series"
    return -cfg.kappa * r + lp.value + cfg.beta * t, kind


def _load_field(cfg: ExperimentConfig):
    if cfg.env_file is not None:
        return load_trap_field(cfg.env_file)
    box = Box.cube(cfg.box_half_width, cfg.dim)
    return trap_field_from_seed(
        cfg.seed, cfg.env_seed, cfg.dim, cfg.nu, cfg.trap_radius, box
    )


def units_total(cfg: ExperimentConfig) -> int:
    if cfg.mode in ("free", "obstacle"):
        return cfg.replicas
    if cfg.mode == "confined":
        return cfg.replicas * len(cfg.times)
    if cfg.mode == "clearing_scan":
        return cfg.clearing.n_envs
    return cfg.clearing.n_envs * cfg.clearing.paths_per_env


def outcome_columns(cfg: ExperimentConfig) -> list[str]:
    if cfg.mode == "free":
        return ["replica_id", "t", "N_t", "range_radius", "censored"]
    if cfg.mode == "confined":
        if cfg.kappa is not None:
            return [
                "replica_id", "t", "event", "event_mode", "decide_time",
                "extinct", "n_t", "censored",
            ]
        cols = ["replica_id", "t", "n_t", "extinct", "censored"]
        if cfg.r_grid is not None:
            cols += [f"n_le_{r:g}" for r in cfg.r_grid]
        return cols
    if cfg.mode == "obstacle":
        return ["replica_id", "env_seed", "t", "N_t", "censored"]
    if cfg.mode == "clearing_scan":
        return ["env_index", "env_seed", "clearing_radius", "resolution", "center"]
    return ["env_index", "env_seed", "path_id", "clearing_radius", "hit"]


def _chunk_free(cfg: ExperimentConfig, ids: np.ndarray) -> list[list]:
    rows = []
    if cfg.count_only:
        for rid in ids:
            counts = sample_yule_counts(RngStream(cfg.seed, int(rid)), cfg.beta, cfg.times)
            for t, n in zip(cfg.times, counts):
                rows.append([int(rid), float(t), float(n), None, False])
        return rows
    res = simulate_batch(
        cfg.seed, ids, cfg.dim, cfg.beta, cfg.times[-1],
        obs_times=np.asarray(cfg.times), cap=cfg.cap,
    )
    for i, rid in enumerate(ids):
        for j, t in enumerate(cfg.times):
            cens = bool(res.censored[i])
            rows.append([
                int(rid), float(t),
                None if cens else int(res.counts[i, j]),
                None if cens else float(res.range_radius[i, j]),
                cens,
            ])
    return rows


def _chunk_confined(cfg: ExperimentConfig, ids: np.ndarray) -> list[list]:
    rows = []
    rf = radius_fn_from_spec(cfg)
    by_horizon: dict[int, list[int]] = {}
    for u in ids:
        by_horizon.setdefault(int(u) // cfg.replicas, []).append(int(u))
    for h_idx in sorted(by_horizon):
        t = cfg.times[h_idx]
        r = rf(t)
        units = np.asarray(by_horizon[h_idx], dtype=np.int64)
        event = None
        if cfg.kappa is not None:
            log_c, _ = ld_log_threshold(cfg, t)
            event = LDEventSpec(
                log_threshold=log_c,
                m_min=cfg.ld.m_min,
                margin_c=cfg.ld.margin_c,
                cap=cfg.ld.cap,
                check_dt=cfg.ld.check_dt,
            )
        res = simulate_batch(
            cfg.seed, units, cfg.dim, cfg.beta, t,
            step=cfg.step,
            kill_radius=None if cfg.r_grid is not None else r,
            r_grid=cfg.r_grid,
            cap=cfg.cap,
            event=event,
        )
        for i, u in enumerate(units):
            cens = bool(res.censored[i])
            if cfg.kappa is not None:
                exact = res.event_mode[i] in ("exact", "extinct")
                rows.append([
                    int(u), float(t), int(res.event[i]), str(res.event_mode[i]),
                    float(res.decide_time[i]),
                    bool(res.extinct[i]),
                    int(res.counts[i, -1]) if exact and not cens else None,
                    cens,
                ])
            else:
                row = [
                    int(u), float(t),
                    None if cens else int(res.counts[i, -1]),
                    bool(res.extinct[i]),
                    cens,
                ]
                if cfg.r_grid is not None:
                    row += [
                        None if cens else int(v) for v in res.profile[i]
                    ]
                rows.append(row)
    return rows


def _chunk_obstacle(cfg: ExperimentConfig, ids: np.ndarray) -> list[list]:
    field = _load_field(cfg)
    spec = ObstacleBranchSpec(beta=cfg.beta, beta_bar=cfg.beta_bar, field=field)
    res = simulate_batch(
        cfg.seed, ids, cfg.dim, cfg.beta, cfg.times[-1],
        obs_times=np.asarray(cfg.times), obstacle=spec, cap=cfg.cap,
    )
    rows = []
    for i, rid in enumerate(ids):
        for j, t in enumerate(cfg.times):
            cens = bool(res.censored[i])
            rows.append([
                int(rid), cfg.env_seed, float(t),
                None if cens else int(res.counts[i, j]),
                cens,
            ])
    return rows


def _chunk_clearing_scan(cfg: ExperimentConfig, ids: np.ndarray) -> list[list]:
    c = cfg.clearing
    box = Box.cube(c.half_width, cfg.dim)
    rows = []
    for j in ids:
        field = trap_field_from_seed(
            cfg.seed, cfg.env_seed + int(j), cfg.dim, cfg.nu, cfg.trap_radius, box
        )
        rep = largest_clearing(field, box, c.resolution, inscribed=True)
        rows.append([
            int(j), cfg.env_seed + int(j), float(rep.radius), float(rep.resolution),
            ";".join(repr(v) for v in rep.center),
        ])
    return rows


def _chunk_clearing_hit(cfg: ExperimentConfig, ids: np.ndarray) -> list[list]:
    c = cfg.clearing
    half = cfg.box_half_width or math.ceil(8.5 * math.sqrt(c.t_end))
    box = Box.cube(half, cfg.dim)
    rho = theory.lemma2_radius(cfg.dim, cfg.nu, c.t_end)
    n_steps = int(math.ceil(c.t_end / c.step))
    rows = []
    field = None
    field_env = None
    for u in ids:
        j, p = int(u) // c.paths_per_env, int(u) % c.paths_per_env
        if field is None or field_env != j:
            field = trap_field_from_seed(
                cfg.seed, cfg.env_seed + j, cfg.dim, cfg.nu, cfg.trap_radius, box
            )
            field_env = j
        stream = RngStream(cfg.seed, int(u))
        z = stream.gaussian(n_steps * cfg.dim).reshape(n_steps, cfg.dim)
        path = np.vstack([np.zeros((1, cfg.dim)), np.cumsum(z * math.sqrt(c.step), axis=0)])
        hit = good_point_hit(field, path, rho)
        rows.append([int(u), cfg.env_seed + j, p, float(rho), bool(hit)])
    return rows


_CHUNK_FNS = {
    "free": _chunk_free,
    "confined": _chunk_confined,
    "obstacle": _chunk_obstacle,
    "clearing_scan": _chunk_clearing_scan,
    "clearing_hit": _chunk_clearing_hit,
}


def _chunk_worker(args) -> tuple[int, list[list]]:
    cfg_dict, chunk_idx, start, stop = args
    cfg = config_from_dict(cfg_dict)
    ids = np.arange(start, stop, dtype=np.int64)
    return chunk_idx, _CHUNK_FNS[cfg.mode](cfg, ids)


class RunInterrupted(Exception):
    """Raised when max_chunks stopped the run early (checkpoint saved)."""


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str,
    workers: int = 1,
    checkpoint_path: str | None = None,
    max_chunks: int | None = None,
    done: dict[int, list] | None = None,
) -> RunPaths:
    """Execute all replica chunks, then write outcomes/estimates/metadata.

    ``max_chunks`` stops after that many newly finished chunks (saving a
    checkpoint and raising RunInterrupted) to exercise resume paths.
    """
    t0 = time.time()
    cfg_dict = config_to_dict(cfg)
    cfg_hash = config_hash(cfg)
    total = units_total(cfg)
    n_chunks = (total + cfg.chunk_size - 1) // cfg.chunk_size
    done = dict(done or {})
    todo = [
        (cfg_dict, i, i * cfg.chunk_size, min((i + 1) * cfg.chunk_size, total))
        for i in range(n_chunks)
        if i not in done
    ]

    fresh = 0
    try:
        if workers <= 1:
            for task in todo:
                idx, rows = _chunk_worker(task)
                done[idx] = rows
                fresh += 1
                if max_chunks is not None and fresh >= max_chunks and len(done) < n_chunks:
                    raise RunInterrupted
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for idx, rows in pool.map(_chunk_worker, todo):
                    done[idx] = rows
                    fresh += 1
                    if max_chunks is not None and fresh >= max_chunks and len(done) < n_chunks:
                        raise RunInterrupted
    except RunInterrupted:
        if checkpoint_path is None:
            raise
        save_checkpoint(checkpoint_path, cfg_dict, cfg_hash, done)
        raise
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, cfg_dict, cfg_hash, done)

    rows = [row for i in range(n_chunks) for row in done[i]]
    columns = outcome_columns(cfg)
    eio.ensure_dir(out_dir)
    paths = RunPaths(
        out_dir=out_dir,
        outcomes=f"{out_dir}/outcomes.csv",
        estimates=f"{out_dir}/estimates.csv",
        run_meta=f"{out_dir}/run.json",
    )
    eio.write_outcomes(paths.outcomes, cfg.mode, cfg_hash, columns, rows)
    eio.write_estimates(paths.estimates, cfg_hash, compute_estimates(cfg, columns, rows))
    if cfg.mode == "obstacle" and cfg.env_file is None:
        save_trap_field(_load_field(cfg), f"{out_dir}/env.csv")
    eio.write_run_metadata(
        paths.run_meta,
        {
            "config": cfg_dict,
            "config_hash": cfg_hash,
            "mode": cfg.mode,
            "units": total,
            "version": __version__,
            "wall_time_s": round(time.time() - t0, 3),
            "workers": workers,
        },
    )
    return paths


def resume_experiment(
    checkpoint_path: str, out_dir: str, workers: int = 1, max_chunks: int | None = None
) -> RunPaths:
    """Continue an interrupted run to byte-identical final outputs."""
    cfg_dict, saved_hash, chunks = load_checkpoint(checkpoint_path)
    cfg = config_from_dict(cfg_dict)
    if config_hash(cfg) != saved_hash:
        raise ValueError("checkpoint config does not match its recorded hash")
    return run_experiment(
        cfg, out_dir, workers=workers, checkpoint_path=checkpoint_path,
        max_chunks=max_chunks, done=chunks,
    )


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------


def _col(columns, rows, name):
    j = columns.index(name)
    return [r[j] for r in rows]


def compute_estimates(cfg: ExperimentConfig, columns: list[str], rows: list[list]) -> list[list]:
    if cfg.mode == "free":
        return _estimates_free(cfg, columns, rows)
    if cfg.mode == "confined":
        if cfg.kappa is not None:
            return _estimates_ld(cfg, columns, rows)
        return _estimates_confined(cfg, columns, rows)
    if cfg.mode == "obstacle":
        return _estimates_obstacle(cfg, columns, rows)
    if cfg.mode == "clearing_scan":
        return _estimates_clearing_scan(cfg, columns, rows)
    return _estimates_clearing_hit(cfg, columns, rows)


def _estimates_free(cfg, columns, rows):
    out = []
    for t in cfg.times:
        sel = [r for r in rows if r[columns.index("t")] == t]
        cens = sum(1 for r in sel if r[columns.index("censored")])
        vals = np.array(
            [r[columns.index("N_t")] for r in sel if not r[columns.index("censored")]],
            dtype=np.float64,
        )
        n = len(vals)
        m, lo, hi = mean_interval(vals)
        out.append([f"mean_N_t{t:g}", m, lo, hi, n, cens, ""])
        k1 = int(np.sum(vals == 1))
        wlo, whi = wilson_interval(k1, n)
        out.append([f"P_N_eq_1_t{t:g}", k1 / n, wlo, whi, n, cens, ""])
    return out


def _estimates_confined(cfg, columns, rows):
    out = []
    rf = radius_fn_from_spec(cfg)
    for t in cfg.times:
        sel = [r for r in rows if r[columns.index("t")] == t]
        cens = sum(1 for r in sel if r[columns.index("censored")])
        ok = [r for r in sel if not r[columns.index("censored")]]
        vals = np.array([r[columns.index("n_t")] for r in ok], dtype=np.float64)
        m, lo, hi = mean_interval(vals)
        out.append([f"mean_n_t{t:g}", m, lo, hi, len(ok), cens, f"r={rf(t)!r}"])
        ext = sum(1 for r in ok if r[columns.index("extinct")])
        wlo, whi = wilson_interval(ext, len(ok))
        out.append([f"P_extinct_t{t:g}", ext / len(ok), wlo, whi, len(ok), cens, ""])
        if cfg.r_grid is not None:
            for rr in cfg.r_grid:
                col = columns.index(f"n_le_{rr:g}")
                pv = np.array([r[col] for r in ok], dtype=np.float64)
                m, lo, hi = mean_interval(pv)
                out.append([f"mean_n_le_{rr:g}_t{t:g}", m, lo, hi, len(ok), cens, ""])
    return out


def _estimates_ld(cfg, columns, rows):
    out = []
    rf = radius_fn_from_spec(cfg)
    stats = []
    for t in cfg.times:
        sel = [r for r in rows if r[columns.index("t")] == t]
        n = len(sel)
        r = rf(t)
        k = sum(1 for row in sel if row[columns.index("event")] == 1)
        ext = sum(1 for row in sel if row[columns.index("extinct")])
        capped = sum(1 for row in sel if row[columns.index("event_mode")] == "cap")
        log_c, p_kind = ld_log_threshold(cfg, t)
        stats.append(HorizonStat(t=t, r=r, events=k, n=n))
        wlo, whi = wilson_interval(k, n)
        out.append([f"P_event_t{t:g}", k / n, wlo, whi, n, 0, f"threshold=exp({log_c!r})"])
        if k > 0:
            out.append([
                f"log_rate_t{t:g}", math.log(k / n) / r,
                math.log(max(wlo, 1e-300)) / r, math.log(whi) / r,
                n, 0, f"r={r!r}",
            ])
        else:
            out.append([
                f"log_rate_upper_t{t:g}", math.log(whi) / r, None, None,
                n, 0, "one-sided: zero events",
            ])
        elo, ehi = wilson_interval(ext, n)
        out.append([f"P_extinct_t{t:g}", ext / n, elo, ehi, n, 0, ""])
        out.append([f"log_threshold_t{t:g}", log_c, None, None, n, 0, f"p_t={p_kind}"])
        out.append([f"n_cap_decided_t{t:g}", capped, None, None, n, 0, "sign-decided at decision cap"])
    fit = estimate_ld_rate(stats)
    if fit.slope is not None:
        note = "corner band from Wilson CIs" + ("; one-sided horizons present" if fit.one_sided else "")
        out.append(["ld_slope", fit.slope, fit.band[0], fit.band[1], sum(s.n for s in stats), 0, note])
    else:
        out.append(["ld_slope_upper", fit.band[1], None, None, sum(s.n for s in stats), 0,
                    "one-sided: all horizons zero events"])
    return out


def _estimates_obstacle(cfg, columns, rows):
    n_reps = cfg.replicas
    counts = np.zeros((n_reps, len(cfg.times)))
    censored = np.zeros(n_reps, dtype=bool)
    tcol, ncol, ccol, rcol = (
        columns.index("t"), columns.index("N_t"),
        columns.index("censored"), columns.index("replica_id"),
    )
    tpos = {t: j for j, t in enumerate(cfg.times)}
    for r in rows:
        i = r[rcol]
        if r[ccol]:
            censored[i] = True
        else:
            counts[i, tpos[r[tcol]]] = r[ncol]
    out = []
    grows = estimate_growth_exponent(np.asarray(cfg.times), counts, censored, cfg.beta, cfg.dim)
    for g in grows:
        out.append([f"log_growth_t{g.t:g}", g.mean_log_growth, g.lo, g.hi, g.n_used, g.n_censored, ""])
        out.append([
            f"rescaled_growth_t{g.t:g}", g.mean_rescaled, g.rescaled_lo, g.rescaled_hi,
            g.n_used, g.n_censored, "(log t)^(2/d) ((log N)/t - beta)",
        ])
        if g.t > math.e:
            pred = theory.quenched_growth_exponent(cfg.dim, cfg.nu, cfg.beta, g.t)
            out.append([
                f"growth_prediction_t{g.t:g}", pred.exponent, None, None, g.n_used,
                g.n_censored, f"asymptotic; limit={pred.limit_value!r}",
            ])
    return out


def _estimates_clearing_scan(cfg, columns, rows):
    c = cfg.clearing
    radii = np.array(_col(columns, rows, "clearing_radius"), dtype=np.float64)
    k = int(np.sum(radii >= c.rho))
    n = len(radii)
    wlo, whi = wilson_interval(k, n)
    om = theory.unit_ball_volume(cfg.dim)
    bound = 1.0 - math.exp(
        -math.floor(c.half_width / c.rho) ** cfg.dim * math.exp(-cfg.nu * om * c.rho ** cfg.dim)
    )
    m, lo, hi = mean_interval(radii)
    return [
        [f"P_clearing_ge_{c.rho:g}", k / n, wlo, whi, n, 0, "annealed over env_seed+j"],
        ["clearing_bound", bound, None, None, n, 0,
         "1-exp(-floor(l/rho)^d exp(-nu omega_d rho^d))"],
        ["mean_clearing_radius", m, lo, hi, n, 0, ""],
    ]


def _estimates_clearing_hit(cfg, columns, rows):
    c = cfg.clearing
    hits = np.array(_col(columns, rows, "hit"), dtype=np.int64)
    n = len(hits)
    miss = int(np.sum(hits == 0))
    wlo, whi = wilson_interval(miss, n)
    return [
        ["P_miss", miss / n, wlo, whi, n, 0, "annealed over env_seed+j"],
        ["miss_bound", math.exp(-c.t_end ** (1.0 / 3.0)), None, None, n, 0, "exp(-t^(1/3))"],
        ["clearing_radius", theory.lemma2_radius(cfg.dim, cfg.nu, c.t_end), None, None, n, 0, ""],
    ]
