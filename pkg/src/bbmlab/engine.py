"""The particle engine: free, confined, and mild-obstacle BBM.

Exact-in-law simulation: per-particle Exp(beta) branching clocks,
Gaussian jumps between events, and (in monitored modes) radial
bridge-maximum sampling on a sub-step grid so that boundary crossings
between vertices are accounted for.

Every particle owns a counter-addressed substream derived from the
replica stream and its genealogy, so any processing order, batch
composition, worker count, or population cap produces bit-identical
trajectories.  The engine therefore simulates whole batches of replicas
in flat numpy arrays; a single replica is just a batch of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import theory
from .environment import TrapField
from .kernels import (
    EVENT_STREAM_SALT,
    MOTION_STREAM_SALT,
    ParameterError,
    RngStream,
    bridge_max_sample,
    derive_pair,
    gaussian_at,
    spawn_keys,
    raw_u64,
    stream_key,
    u64_to_unit,
    uniform_at,
)

DEFAULT_CAP = 10**7


class EnvironmentTooSmallError(RuntimeError):
    """A particle left the realized trap-field box; enlarge the box."""


@dataclass(frozen=True)
class RadiusFunction:
    """The expanding-ball schedule r(t).

    Forms: power r(t) = c t^alpha with 0 < alpha < 1/2 (subdiffusive),
    log_power r(t) = c (log t)^p, constant r(t) = r0.
    """

    form: str
    c: float = 1.0
    alpha: float = 0.4
    p: float = 1.0
    r0: float = 1.0

    def __post_init__(self) -> None:
        if self.form not in ("power", "log_power", "constant"):
            raise ParameterError(f"unknown radius form {self.form!r}")
        if self.form == "power" and not 0.0 < self.alpha < 0.5:
            raise ParameterError(
                f"power radius needs 0 < alpha < 1/2, got {self.alpha}"
            )

    def __call__(self, t: float) -> float:
        if self.form == "power":
            return self.c * t ** self.alpha
        if self.form == "log_power":
            return self.c * math.log(t) ** self.p
        return self.r0


@dataclass(frozen=True)
class ObstacleBranchSpec:
    """Spatially dependent branching: beta outside K, beta_bar inside.

    The model has beta_bar < beta; equality is allowed here because a
    beta_bar = beta run must reproduce free BBM exactly, which is the
    standard validation of the thinning construction.
    """

    beta: float
    beta_bar: float
    field: TrapField

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta_bar <= self.beta:
            raise ParameterError(
                f"need 0 <= beta_bar <= beta, got beta_bar={self.beta_bar} beta={self.beta}"
            )


@dataclass(frozen=True)
class Particle:
    """Per-particle snapshot (ancestral sup-norm is inherited at birth)."""

    position: np.ndarray
    birth_time: float
    next_branch_candidate: float
    ancestral_sup_norm: float
    alive: bool = True


@dataclass
class Population:
    """Final-state snapshot of one replica's live particle set."""

    particles: list[Particle]
    current_time: float
    total_born: int
    cap: int
    censored: bool


@dataclass(frozen=True)
class LDEventSpec:
    """Early-decision parameters for the event {n_T < threshold}.

    ``log_threshold`` is log(gamma_T p_T e^{beta T}).  A replica is
    decided as soon as the conditional expectation of n_T given the
    current confined population (exact many-to-one over the per-particle
    d=1 confinement series) is away from the threshold by more than
    margin_c / sqrt(population); at ``cap`` the sign decides.
    """

    log_threshold: float
    m_min: int = 32
    margin_c: float = 6.0
    cap: int = 4096
    check_dt: float = 0.25


@dataclass
class BatchResult:
    """Arrays indexed by replica within the batch."""

    counts: np.ndarray                 # (n_reps, n_obs) int64, -1 when censored
    censored: np.ndarray               # (n_reps,) bool
    extinct: np.ndarray                # (n_reps,) bool
    total_born: np.ndarray             # (n_reps,) int64
    range_radius: np.ndarray | None = None    # (n_reps, n_obs) free mode
    profile: np.ndarray | None = None          # (n_reps, n_r) profile mode
    event: np.ndarray | None = None            # (n_reps,) int8: 1/0, -1 undecided
    event_mode: np.ndarray | None = None       # (n_reps,) of {exact,extinct,mean,cap}
    decide_time: np.ndarray | None = None      # (n_reps,)
    trace: np.ndarray | None = None            # (n_reps, n_trace) confined trace
    trace_times: np.ndarray | None = None
    # final-state arrays (populated when return_state=True)
    final_rep: np.ndarray | None = None
    final_pos: np.ndarray | None = None
    final_sup: np.ndarray | None = None
    final_tbr: np.ndarray | None = None
    final_time: float | None = None


_ROW_FIELDS = ("rep", "ek0", "ek1", "ectr", "mk0", "mk1", "mctr", "nsp",
               "tcur", "sup", "vmax", "tbr")


class _Swarm:
    """Flat particle arrays for one batch of replicas.

    Rows live densely in [0, n) of capacity-doubled buffers, so branch
    births are O(new rows) and whole-population advances run on views
    without index gathers.

    Each particle owns two substreams: an event stream (lifetimes,
    acceptance coins, offspring identity) and a motion stream (Gaussian
    steps, bridge draws).  The family tree is therefore a pure function
    of the replica stream alone, unchanged by monitoring resolution or
    observation grids.
    """

    def __init__(self, seed: int, stream_ids: np.ndarray, dim: int, beta: float):
        n = len(stream_ids)
        self.dim = dim
        self.beta = beta
        self.n_reps = n
        self.n = n
        keys = [stream_key(seed, int(s)) for s in stream_ids]
        base0 = np.array([k[0] for k in keys], dtype=np.uint64)
        base1 = np.array([k[1] for k in keys], dtype=np.uint64)
        self._rep = np.arange(n, dtype=np.int64)
        self._ek0, self._ek1 = derive_pair(base0, base1, EVENT_STREAM_SALT)
        self._mk0, self._mk1 = derive_pair(base0, base1, MOTION_STREAM_SALT)
        self._ectr = np.zeros(n, dtype=np.uint64)
        self._mctr = np.zeros(n, dtype=np.uint64)
        self._nsp = np.zeros(n, dtype=np.uint64)
        self._pos = np.zeros((n, dim), dtype=np.float64)
        self._tcur = np.zeros(n, dtype=np.float64)
        self._sup = np.zeros(n, dtype=np.float64)
        self._vmax = np.zeros(n, dtype=np.float64)
        self._tbr = np.empty(n, dtype=np.float64)
        u = uniform_at(self._ek0, self._ek1, self._ectr)
        self._ectr += np.uint64(1)
        self._tbr[:] = -np.log(u) / beta
        self.live_count = np.ones(n, dtype=np.int64)
        self.total_born = np.ones(n, dtype=np.int64)

    # live-row views -------------------------------------------------------

    @property
    def rep(self):
        return self._rep[: self.n]

    @property
    def pos(self):
        return self._pos[: self.n]

    @property
    def tcur(self):
        return self._tcur[: self.n]

    @property
    def sup(self):
        return self._sup[: self.n]

    @property
    def vmax(self):
        return self._vmax[: self.n]

    @property
    def tbr(self):
        return self._tbr[: self.n]

    def _ensure(self, extra: int) -> None:
        need = self.n + extra
        cap = len(self._rep)
        if need <= cap:
            return
        new_cap = max(need, 2 * cap)
        for name in _ROW_FIELDS:
            buf = getattr(self, "_" + name)
            grown = np.empty((new_cap,) + buf.shape[1:], dtype=buf.dtype)
            grown[: self.n] = buf[: self.n]
            setattr(self, "_" + name, grown)
        grown = np.empty((new_cap, self.dim), dtype=np.float64)
        grown[: self.n] = self._pos[: self.n]
        self._pos = grown

    # draw helpers (each consumes counters of the particles involved) ------

    def _draw_event_exponential(self, idx: np.ndarray) -> np.ndarray:
        u = uniform_at(self._ek0[idx], self._ek1[idx], self._ectr[idx])
        self._ectr[idx] += np.uint64(1)
        return -np.log(u) / self.beta

    def _draw_event_uniform(self, idx: np.ndarray) -> np.ndarray:
        u = uniform_at(self._ek0[idx], self._ek1[idx], self._ectr[idx])
        self._ectr[idx] += np.uint64(1)
        return u

    # structural ops -------------------------------------------------------

    def compress(self, keep: np.ndarray) -> None:
        """Drop live rows where keep is False (mask over [0, n))."""
        k = int(keep.sum())
        if k == self.n:
            return
        for name in _ROW_FIELDS:
            buf = getattr(self, "_" + name)
            buf[:k] = buf[: self.n][keep]
        self._pos[:k] = self._pos[: self.n][keep]
        self.n = k

    def advance_all(self, new_time: float, monitor: bool) -> None:
        """Move every live row to the absolute time new_time."""
        n, d = self.n, self.dim
        if n == 0:
            return
        dt = np.maximum(new_time - self._tcur[:n], 0.0)
        base = self._mctr[:n, None] + np.arange(d, dtype=np.uint64)[None, :]
        z = gaussian_at(self._mk0[:n, None], self._mk1[:n, None], base)
        self._mctr[:n] += np.uint64(d)
        pos = self._pos[:n]
        old_rad = np.sqrt(np.einsum("ij,ij->i", pos, pos))
        pos += z * np.sqrt(dt)[:, None]
        new_rad = np.sqrt(np.einsum("ij,ij->i", pos, pos))
        if monitor:
            u = uniform_at(self._mk0[:n], self._mk1[:n], self._mctr[:n])
            self._mctr[:n] += np.uint64(1)
            m = bridge_max_sample(old_rad, new_rad, dt, u)
            np.maximum(self._sup[:n], m, out=self._sup[:n])
        else:
            np.maximum(self._sup[:n], new_rad, out=self._sup[:n])
        np.maximum(self._vmax[:n], new_rad, out=self._vmax[:n])
        self._tcur[:n] = new_time

    def advance_idx(self, idx: np.ndarray, new_time: np.ndarray, monitor: bool) -> None:
        """Move particles idx to absolute times new_time (one bridged jump)."""
        if len(idx) == 0:
            return
        d = self.dim
        dt = np.maximum(new_time - self._tcur[idx], 0.0)
        base = self._mctr[idx][:, None] + np.arange(d, dtype=np.uint64)[None, :]
        z = gaussian_at(self._mk0[idx][:, None], self._mk1[idx][:, None], base)
        self._mctr[idx] += np.uint64(d)
        old = self._pos[idx]
        old_rad = np.sqrt(np.einsum("ij,ij->i", old, old))
        moved = old + z * np.sqrt(dt)[:, None]
        self._pos[idx] = moved
        new_rad = np.sqrt(np.einsum("ij,ij->i", moved, moved))
        if monitor:
            u = uniform_at(self._mk0[idx], self._mk1[idx], self._mctr[idx])
            self._mctr[idx] += np.uint64(1)
            m = bridge_max_sample(old_rad, new_rad, dt, u)
            self._sup[idx] = np.maximum(self._sup[idx], m)
        else:
            self._sup[idx] = np.maximum(self._sup[idx], new_rad)
        self._vmax[idx] = np.maximum(self._vmax[idx], new_rad)
        self._tcur[idx] = new_time

    def split(self, idx: np.ndarray) -> None:
        """Strictly dyadic branch of particles idx (already at branch time).

        Spine representation: one offspring continues the parent's
        substreams, the other gets identity (parent, spawn index) with
        fresh event/motion substreams.  The law is that of
        parent-dies-two-born; the relabeling makes the family tree
        invariant under monitoring resolution, observation grids, caps,
        and trap thinning that only removes spawned subtrees.
        """
        m = len(idx)
        if m == 0:
            return
        self._ensure(m)
        b0, b1 = spawn_keys(self._ek0[idx], self._ek1[idx], self._nsp[idx])
        self._nsp[idx] += np.uint64(1)
        self._tbr[idx] = self._tcur[idx] + self._draw_event_exponential(idx)
        ce0, ce1 = derive_pair(b0, b1, EVENT_STREAM_SALT)
        cm0, cm1 = derive_pair(b0, b1, MOTION_STREAM_SALT)
        ub = u64_to_unit(raw_u64(ce0, ce1, np.zeros(m, dtype=np.uint64)))
        n = self.n
        self._rep[n : n + m] = self._rep[idx]
        self._ek0[n : n + m] = ce0
        self._ek1[n : n + m] = ce1
        self._ectr[n : n + m] = 1
        self._mk0[n : n + m] = cm0
        self._mk1[n : n + m] = cm1
        self._mctr[n : n + m] = 0
        self._nsp[n : n + m] = 0
        self._pos[n : n + m] = self._pos[idx]
        self._tcur[n : n + m] = self._tcur[idx]
        self._sup[n : n + m] = self._sup[idx]
        self._vmax[n : n + m] = self._vmax[idx]
        self._tbr[n : n + m] = self._tcur[idx] - np.log(ub) / self.beta
        self.n = n + m
        np.add.at(self.live_count, self._rep[idx], 1)
        np.add.at(self.total_born, self._rep[idx], 1)


def _landmark_grid(t_end: float, step: float | None, obs_times: np.ndarray):
    """Absolute pause times: the sub-step grid (if monitored) plus
    observation times; returns (landmarks, indices of obs in landmarks)."""
    if step is None:
        marks = np.unique(np.concatenate([[0.0], obs_times]))
    else:
        n = int(round(t_end / step))
        if abs(n * step - t_end) > 1e-9 * max(1.0, t_end):
            n = int(math.ceil(t_end / step))
        grid = np.linspace(0.0, t_end, n + 1)
        marks = np.unique(np.concatenate([grid, obs_times]))
    obs_idx = np.searchsorted(marks, obs_times)
    if not np.allclose(marks[obs_idx], obs_times, rtol=0, atol=1e-9):
        raise ParameterError("observation times must lie on the landmark grid")
    return marks, obs_idx


def simulate_batch(
    seed: int,
    stream_ids,
    dim: int,
    beta: float,
    t_end: float,
    obs_times=None,
    step: float | None = None,
    kill_radius: float | None = None,
    obstacle: ObstacleBranchSpec | None = None,
    cap: int = DEFAULT_CAP,
    r_grid=None,
    event: LDEventSpec | None = None,
    trace_times=None,
    return_state: bool = False,
) -> BatchResult:
    """Run one batch of replicas; see the mode wrappers below.

    kill_radius enables confined mode (requires ``step``); ``obstacle``
    enables thinned branching; ``r_grid`` collects the ancestral
    sup-norm profile instead of killing; ``event`` adds the early
    decision for the atypically-small-mass indicator.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    if t_end <= 0:
        raise ParameterError(f"t_end must be > 0, got {t_end}")
    if kill_radius is not None and step is None:
        raise ParameterError("confined mode needs a monitoring step")
    if event is not None and kill_radius is None:
        raise ParameterError("event decisions apply to confined mode only")
    if event is not None and dim != 1:
        raise ParameterError("early event decision requires dim=1 (exact series)")
    stream_ids = np.asarray(stream_ids, dtype=np.int64)
    obs_times = np.asarray([t_end] if obs_times is None else obs_times, dtype=np.float64)
    monitor = step is not None
    prune_radius = kill_radius
    if r_grid is not None:
        r_grid = np.asarray(r_grid, dtype=np.float64)
        if np.any(np.diff(r_grid) <= 0):
            raise ParameterError("r_grid must be sorted strictly ascending")
        prune_radius = float(r_grid[-1])
    if trace_times is not None:
        trace_times = np.asarray(trace_times, dtype=np.float64)

    marks, obs_idx = _landmark_grid(t_end, step, obs_times)
    obs_at = {int(i): j for j, i in enumerate(obs_idx)}
    trace_at = {}
    if trace_times is not None:
        tr_idx = np.searchsorted(marks, trace_times)
        if not np.allclose(marks[tr_idx], trace_times, rtol=0, atol=1e-9):
            raise ParameterError("trace times must lie on the landmark grid")
        trace_at = {int(i): j for j, i in enumerate(tr_idx)}

    sw = _Swarm(seed, stream_ids, dim, beta)
    n_reps = sw.n_reps
    counts = np.zeros((n_reps, len(obs_times)), dtype=np.int64)
    rrange = np.zeros((n_reps, len(obs_times)), dtype=np.float64)
    trace = np.zeros((n_reps, 0 if trace_times is None else len(trace_times)), dtype=np.int64)
    censored = np.zeros(n_reps, dtype=bool)
    extinct = np.zeros(n_reps, dtype=bool)
    active = np.ones(n_reps, dtype=bool)   # still being simulated

    ev_state = None
    if event is not None:
        ev_state = {
            "flag": np.full(n_reps, -1, dtype=np.int8),
            "mode": np.array(["none"] * n_reps, dtype=object),
            "time": np.full(n_reps, np.nan),
            "stride": max(1, int(round(event.check_dt / (step or event.check_dt)))),
        }
    eff_cap = event.cap if event is not None else cap

    accept_ratio = None
    if obstacle is not None:
        accept_ratio = obstacle.beta_bar / obstacle.beta

    def drop_replicas(rep_mask: np.ndarray) -> None:
        """Stop simulating the flagged replicas and free their rows."""
        active[rep_mask] = False
        keep = ~rep_mask[sw.rep]
        sw.compress(keep)

    def check_box(idx: np.ndarray) -> None:
        if obstacle is None or len(idx) == 0:
            return
        inside = obstacle.field.bounding_box.contains(sw.pos[idx])
        if not np.all(inside):
            worst = float(np.max(np.abs(sw.pos[idx])))
            raise EnvironmentTooSmallError(
                f"particle left the trap-field box; need half-width > {worst:.3f} "
                f"(plus margin) at t <= {t_end}"
            )

    for j in range(1, len(marks)):
        nxt = marks[j]
        if not active.any():
            break

        # branch waves within (previous mark, nxt]
        while True:
            mask = sw.tbr < nxt
            if not mask.any():
                break
            idx = np.nonzero(mask)[0]
            sw.advance_idx(idx, sw._tbr[idx], monitor)
            check_box(idx)
            dead = np.empty(0, dtype=np.int64)
            if monitor and prune_radius is not None:
                ok = sw._sup[idx] < prune_radius
                dead = idx[~ok]
                idx = idx[ok]
            if len(idx):
                # every candidate consumes one acceptance draw, so runs in
                # nested trap fields stay coupled trajectory-by-trajectory
                u = sw._draw_event_uniform(idx)
                if accept_ratio is not None:
                    in_k = obstacle.field.in_trap(sw._pos[idx])
                    accept = np.where(in_k, u < accept_ratio, True)
                    rej = idx[~accept]
                    sw._tbr[rej] = sw._tcur[rej] + sw._draw_event_exponential(rej)
                    idx = idx[accept]
            sw.split(idx)  # appends rows; earlier indices stay valid
            if len(dead):
                np.add.at(sw.live_count, sw._rep[dead], -1)
                keep = np.ones(sw.n, dtype=bool)
                keep[dead] = False
                sw.compress(keep)
            over = active & (sw.live_count > eff_cap)
            if over.any():
                if event is not None:
                    _decide_at_cap(sw, over, event, ev_state, beta, kill_radius, t_end)
                else:
                    censored[over] = True
                drop_replicas(over)

        # bulk advance to the landmark
        sw.advance_all(nxt, monitor)
        if obstacle is not None:
            check_box(np.arange(sw.n))
        if monitor and prune_radius is not None:
            dead_mask = sw.sup >= prune_radius
            if dead_mask.any():
                np.add.at(sw.live_count, sw.rep[dead_mask], -1)
                sw.compress(~dead_mask)
            gone = active & (sw.live_count == 0)
            if gone.any():
                extinct[gone] = True
                if event is not None:
                    ev_state["flag"][gone] = 1
                    ev_state["mode"][gone] = "extinct"
                    ev_state["time"][gone] = nxt
                drop_replicas(gone)

        # early event decisions
        if event is not None and j % ev_state["stride"] == 0 and nxt < t_end:
            _decide_by_mean(sw, active, event, ev_state, beta, kill_radius, t_end, nxt)
            done = active & (ev_state["flag"] >= 0)
            if done.any():
                drop_replicas(done)

        if j in obs_at:
            col = obs_at[j]
            counts[:, col] = np.where(active, sw.live_count, counts[:, col])
            if len(sw.rep):
                np.maximum.at(rrange[:, col], sw.rep, sw.vmax)
        if j in trace_at:
            trace[:, trace_at[j]] = np.where(active, sw.live_count, 0)

    counts[censored] = -1

    result = BatchResult(
        counts=counts,
        censored=censored,
        extinct=extinct,
        total_born=sw.total_born,
        range_radius=rrange,
        trace=trace if trace_times is not None else None,
        trace_times=trace_times,
    )
    if return_state:
        result.final_rep = sw.rep.copy()
        result.final_pos = sw.pos.copy()
        result.final_sup = sw.sup.copy()
        result.final_tbr = sw.tbr.copy()
        result.final_time = float(marks[-1])

    if r_grid is not None:
        prof = np.zeros((n_reps, len(r_grid)), dtype=np.int64)
        for k, r in enumerate(r_grid):
            sel = sw.sup <= r
            if sel.any():
                prof[:, k] = np.bincount(sw.rep[sel], minlength=n_reps)
        prof[censored] = -1
        result.profile = prof

    if event is not None:
        undecided = ev_state["flag"] < 0
        if undecided.any():
            # reached t_end below cap: exact comparison against the threshold
            final = counts[:, -1].astype(np.float64)
            logn = np.where(final > 0, np.log(np.maximum(final, 1.0)), -np.inf)
            ev_state["flag"][undecided] = (
                logn[undecided] < event.log_threshold
            ).astype(np.int8)
            ev_state["mode"][undecided] = "exact"
            ev_state["time"][undecided] = t_end
        result.event = ev_state["flag"]
        result.event_mode = ev_state["mode"]
        result.decide_time = ev_state["time"]
    return result


def _conditional_log_mean(sw: _Swarm, kill_radius: float, beta: float, u: float):
    """log E[n_T | state] per replica via exact d=1 many-to-one."""
    w = theory.interval_confinement_many(sw.pos[:, 0], kill_radius, u)
    s = np.zeros(sw.n_reps)
    np.add.at(s, sw.rep, w)
    with np.errstate(divide="ignore"):
        return beta * u + np.log(s)


def _decide_by_mean(sw, active, event, ev_state, beta, kill_radius, t_end, now):
    candidates = active & (ev_state["flag"] < 0) & (sw.live_count >= event.m_min)
    if not candidates.any():
        return
    log_mean = _conditional_log_mean(sw, kill_radius, beta, t_end - now)
    margin = event.margin_c / np.sqrt(np.maximum(sw.live_count, 1))
    gap = log_mean - event.log_threshold
    fail = candidates & (gap > margin)
    hit = candidates & (gap < -margin)
    ev_state["flag"][fail] = 0
    ev_state["flag"][hit] = 1
    ev_state["mode"][fail | hit] = "mean"
    ev_state["time"][fail | hit] = now


def _decide_at_cap(sw, over, event, ev_state, beta, kill_radius, t_end):
    now = float(np.max(sw.tcur)) if len(sw.tcur) else t_end
    log_mean = _conditional_log_mean(sw, kill_radius, beta, t_end - now)
    gap = log_mean - event.log_threshold
    pick = over & (ev_state["flag"] < 0)
    ev_state["flag"][pick] = (gap[pick] < 0).astype(np.int8)
    ev_state["mode"][pick] = "cap"
    ev_state["time"][pick] = now


# ---------------------------------------------------------------------------
# single-replica wrappers (the spec-level operations)
# ---------------------------------------------------------------------------


@dataclass
class FreeRunResult:
    observation_times: np.ndarray
    counts: np.ndarray
    range_radius: np.ndarray
    censored: bool
    total_born: int


@dataclass
class ConfinedRunResult:
    t_end: float
    radius: float
    n_t: int
    censored: bool
    extinct: bool
    trace_times: np.ndarray | None = None
    trace: np.ndarray | None = None


@dataclass
class ObstacleRunResult:
    observation_times: np.ndarray
    counts: np.ndarray
    censored: bool


def run_free_bbm(
    stream: RngStream,
    dim: int,
    beta: float,
    t_end: float,
    observation_times=None,
    cap: int = DEFAULT_CAP,
) -> FreeRunResult:
    """Free BBM: per-observation total mass and vertex-resolution range."""
    obs = np.asarray([t_end] if observation_times is None else observation_times)
    res = simulate_batch(
        stream.seed, [stream.stream_id], dim, beta, t_end, obs_times=obs, cap=cap
    )
    return FreeRunResult(
        observation_times=obs,
        counts=res.counts[0],
        range_radius=res.range_radius[0],
        censored=bool(res.censored[0]),
        total_born=int(res.total_born[0]),
    )


def run_confined_bbm(
    stream: RngStream,
    dim: int,
    beta: float,
    radius_fn: RadiusFunction,
    t_end: float,
    step: float,
    cap: int = DEFAULT_CAP,
    trace_times=None,
) -> ConfinedRunResult:
    """Mass at t_end of BBM killed at the horizon ball B(0, r(t_end)).

    Pruning happens as soon as a particle's bridge-sampled ancestral
    sup-norm exceeds r(t_end); this never changes the law of n_t since
    such a particle can never be counted.
    """
    r = radius_fn(t_end)
    res = simulate_batch(
        stream.seed,
        [stream.stream_id],
        dim,
        beta,
        t_end,
        step=step,
        kill_radius=r,
        cap=cap,
        trace_times=trace_times,
    )
    return ConfinedRunResult(
        t_end=t_end,
        radius=r,
        n_t=int(res.counts[0, -1]),
        censored=bool(res.censored[0]),
        extinct=bool(res.extinct[0]),
        trace_times=res.trace_times,
        trace=None if res.trace is None else res.trace[0],
    )


def run_obstacle_bbm(
    stream: RngStream,
    spec: ObstacleBranchSpec,
    t_end: float,
    observation_times=None,
    cap: int = DEFAULT_CAP,
) -> ObstacleRunResult:
    """BBM among mild obstacles via exact thinning of rate-beta candidates."""
    obs = np.asarray([t_end] if observation_times is None else observation_times)
    res = simulate_batch(
        stream.seed,
        [stream.stream_id],
        spec.field.dim,
        spec.beta,
        t_end,
        obs_times=obs,
        obstacle=spec,
        cap=cap,
    )
    return ObstacleRunResult(
        observation_times=obs,
        counts=res.counts[0],
        censored=bool(res.censored[0]),
    )


def confined_mass_profile(
    stream: RngStream,
    dim: int,
    beta: float,
    t_end: float,
    r_grid,
    step: float,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """n_t(r) for every r in r_grid from one replica.

    Counts particles at t_end whose bridge-sampled ancestral sup-norm
    is <= r; nondecreasing in r by construction.
    """
    res = simulate_batch(
        stream.seed,
        [stream.stream_id],
        dim,
        beta,
        t_end,
        step=step,
        r_grid=np.asarray(r_grid, dtype=np.float64),
        cap=cap,
    )
    return res.profile[0]


def population_snapshot(result: BatchResult, replica: int, cap: int = DEFAULT_CAP) -> Population:
    """Assemble the final Population of one replica from a stateful run."""
    if result.final_rep is None:
        raise ValueError("run simulate_batch with return_state=True first")
    sel = result.final_rep == replica
    particles = [
        Particle(
            position=result.final_pos[i],
            birth_time=math.nan,
            next_branch_candidate=float(result.final_tbr[i]),
            ancestral_sup_norm=float(result.final_sup[i]),
        )
        for i in np.nonzero(sel)[0]
    ]
    return Population(
        particles=particles,
        current_time=result.final_time,
        total_born=int(result.total_born[replica]),
        cap=cap,
        censored=bool(result.censored[replica]),
    )


def sample_yule_counts(stream: RngStream, beta: float, obs_times) -> np.ndarray:
    """Exact-in-law total-mass samples of free BBM at the given times.

    The dyadic count is a Yule process: given N_s = n, the time-(s+dt)
    count is a sum of n independent geometrics with mean e^{beta dt}.
    Sampled exactly below 10^4 lines; above that the sum is taken from
    its normal limit (relative CLT error < 1e-2 / sqrt(n)).  Intended
    for count-only controls where mean mass is astronomically large.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    obs = np.asarray(obs_times, dtype=np.float64)
    if np.any(np.diff(obs) <= 0) or obs[0] <= 0:
        raise ParameterError("observation times must be positive increasing")
    out = np.empty(len(obs), dtype=np.float64)
    n, prev = 1.0, 0.0
    for j, t in enumerate(obs):
        dt = t - prev
        p = math.exp(-beta * dt)
        if n <= 1e4:
            k = int(n)
            u = stream.uniform(k)
            if p >= 1.0:
                n = float(k)
            else:
                lines = 1.0 + np.floor(np.log(u) / math.log1p(-p))
                n = float(np.sum(lines))
        else:
            mean = n / p
            sd = math.sqrt(n * (1.0 - p)) / p
            n = max(n, round(mean + sd * stream.gaussian()))
        out[j] = n
        prev = t
    return out
