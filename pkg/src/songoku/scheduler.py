"""Cyclic group-scheduling loop: warm-up, threshold annealing, periodic
regrouping, and per-step updates restricted to one compatible class.

The driver owns all randomness through a single generator seeded from the
config, so identical configs replay bit-identically.  Gradient sources are
duck-typed oracles::

    class Oracle:
        def gradient(self, task: int, theta: np.ndarray, rng) -> np.ndarray: ...
        def loss(self, theta: np.ndarray) -> float: ...          # may be nan
        def init_theta(self) -> np.ndarray: ...                  # optional

Probe gradients at a refresh are one fresh ``gradient`` draw per task.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .grad_stats import (
    DegenerateMatrixError,
    GradStats,
    interference_matrix,
    tau_eff,
    update_ema,
)
from .conflict_graph import (
    AugmentedSchedule,
    Coloring,
    ConflictGraph,
    build_graph,
    enforce_min_coverage,
    welsh_powell,
)
from .combinators import AdaptiveScaleState, CombinatorConfig, apply_combinators
from .records import RunRecord, StepRow, WindowRecord, active_mask

ETA_RULES = ("fixed", "const_over_sqrt_T")


@dataclass
class SchedulerConfig:
    K: int
    d: int
    T: int
    R: int = 32
    beta: float = 0.9
    tau_star: float = 0.5
    T_warm: int = 0
    f_min: int = 1
    eta: float = 0.1
    eta_rule: str = "fixed"
    anneal_a: float = 9.0
    anneal_horizon: int | None = None   # defaults to 4R
    seed: int = 0
    d_phi: int = 0
    norm_floor: float = 1e-8
    permute_classes: bool = False
    freeze_after_first_coloring: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K={self.K}: need at least one task")
        if self.d < 1:
            raise ValueError(f"d={self.d}: need positive gradient dimension")
        if self.T < 0:
            raise ValueError(f"T={self.T} must be >= 0")
        if self.R < 1:
            raise ValueError(f"R={self.R} must be >= 1")
        if not 0.0 < self.tau_star <= 1.0:
            raise ValueError(f"tau_star={self.tau_star} outside (0, 1]")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta={self.beta} outside [0, 1)")
        if self.T > 0 and not 0 <= self.T_warm < self.T:
            raise ValueError(f"T_warm={self.T_warm} must lie in [0, T={self.T})")
        if self.f_min < 1:
            raise ValueError(f"f_min={self.f_min} must be >= 1")
        if self.eta <= 0.0:
            raise ValueError(f"eta={self.eta} must be > 0")
        if self.eta_rule not in ETA_RULES:
            raise ValueError(f"eta_rule={self.eta_rule!r} not in {ETA_RULES}")
        if self.anneal_a <= 0.0:
            raise ValueError(f"anneal_a={self.anneal_a} must be > 0")
        if self.anneal_horizon is not None and self.anneal_horizon < 1:
            raise ValueError(f"anneal_horizon={self.anneal_horizon} must be >= 1")

    @property
    def horizon(self) -> int:
        return self.anneal_horizon if self.anneal_horizon is not None else 4 * self.R

    def step_size(self) -> float:
        if self.eta_rule == "const_over_sqrt_T":
            return self.eta / math.sqrt(max(self.T, 1))
        return self.eta

    def to_dict(self) -> dict:
        return asdict(self)


def anneal_tau(t: int, cfg: SchedulerConfig) -> float:
    """Threshold schedule: 1 through warm-up, then a log-shaped glide to
    tau_star over ``cfg.horizon`` steps, clamped there afterwards.
    """
    if t < 0:
        raise ValueError(f"t={t} must be >= 0")
    if t < cfg.T_warm:
        return 1.0
    s = t - cfg.T_warm
    S = cfg.horizon
    if s >= S:
        return cfg.tau_star
    frac = math.log1p(cfg.anneal_a * s) / math.log1p(cfg.anneal_a * S)
    return 1.0 - (1.0 - cfg.tau_star) * frac


def _fallback_schedule(cfg: SchedulerConfig, tau: float):
    """Single class of all tasks — warm-up / degenerate-statistics behavior."""
    graph = ConflictGraph(n_vertices=cfg.K, edges=frozenset(), tau=tau)
    coloring = Coloring(
        color_of=(1,) * cfg.K, m=1, classes=(tuple(range(cfg.K)),)
    )
    schedule = enforce_min_coverage(coloring, graph, cfg.f_min)
    return graph, coloring, schedule


@dataclass
class SchedulerState:
    cfg: SchedulerConfig
    stats: GradStats
    theta: np.ndarray
    phi: np.ndarray                 # (K, d_phi) per-task parameters
    rng: np.random.Generator
    graph: ConflictGraph
    coloring: Coloring
    schedule: AugmentedSchedule
    r: int = 0                      # window (round) index
    t_r: int = 0                    # first step served by the current window
    tau: float = 1.0                # threshold the current window was built with
    frozen: bool = False
    scale_state: AdaptiveScaleState | None = None


def init_state(
    cfg: SchedulerConfig,
    theta0: np.ndarray | None = None,
    combinators: CombinatorConfig | None = None,
) -> SchedulerState:
    """Install the initial all-task window (no probes; statistics are empty)."""
    tau0 = anneal_tau(0, cfg)
    graph, coloring, schedule = _fallback_schedule(cfg, tau0)
    theta = (
        np.zeros(cfg.d) if theta0 is None else np.array(theta0, dtype=np.float64)
    )
    if theta.shape != (cfg.d,):
        raise ValueError(f"theta0 shape {theta.shape} != ({cfg.d},)")
    scale_state = None
    if combinators is not None and combinators.scales:
        scale_state = AdaptiveScaleState(
            beta=combinators.scale_ema_beta, floor=combinators.scale_floor
        )
    return SchedulerState(
        cfg=cfg,
        stats=GradStats.zeros(cfg.K, cfg.d, cfg.beta, cfg.norm_floor),
        theta=theta,
        phi=np.zeros((cfg.K, cfg.d_phi)),
        rng=np.random.default_rng(cfg.seed),
        graph=graph,
        coloring=coloring,
        schedule=schedule,
        tau=tau0,
        scale_state=scale_state,
    )


def active_set(state: SchedulerState, t: int):
    """Tasks trained at step t: slot ((t - t_r) mod m) + 1 of the schedule."""
    if state.schedule.m < 1:
        raise ValueError("schedule has no slots")
    return tuple(state.schedule.active_for_offset(t - state.t_r))


def apply_update(state: SchedulerState, active, gradients: dict, h: dict | None, eta: float) -> SchedulerState:
    """theta -= eta * sum of active gradients; phi_k -= eta * h_k for active k."""
    active = sorted(active)
    missing = [k for k in active if k not in gradients]
    if missing:
        raise ValueError(f"missing gradients for active tasks {missing}")
    extra = sorted(set(gradients) - set(active))
    if extra:
        raise ValueError(f"gradients supplied for inactive tasks {extra}")
    if active:
        total = np.zeros_like(state.theta)
        for k in active:
            total += np.asarray(gradients[k], dtype=np.float64)
        state.theta -= eta * total
    if h:
        bad = sorted(set(h) - set(active))
        if bad:
            raise ValueError(f"task-parameter gradients for inactive tasks {bad}")
        for k, hk in h.items():
            state.phi[k] -= eta * np.asarray(hk, dtype=np.float64)
    return state


def _permuted(coloring: Coloring, rng: np.random.Generator) -> Coloring:
    perm = rng.permutation(coloring.m)
    classes = tuple(coloring.classes[p] for p in perm)
    color_of = [0] * len(coloring.color_of)
    for c, cls in enumerate(classes, start=1):
        for v in cls:
            color_of[v] = c
    return Coloring(color_of=tuple(color_of), m=coloring.m, classes=classes)


def refresh(
    state: SchedulerState,
    probe_gradients,
    tau: float,
    graph_builder=None,
) -> SchedulerState:
    """Fold probes into the statistics, rebuild graph/coloring, open a window.

    ``probe_gradients`` must cover every task (index-addressable).  When the
    state is frozen (static-grouping ablation) the statistics still advance
    but the existing schedule is retained.
    """
    for k in range(state.cfg.K):
        update_ema(state.stats, k, np.asarray(probe_gradients[k], dtype=np.float64))
    if not state.frozen:
        try:
            if graph_builder is not None:
                graph = graph_builder(state.stats, tau, state.r + 1)
            else:
                graph = build_graph(interference_matrix(state.stats), tau)
            coloring = welsh_powell(graph)
            if state.cfg.permute_classes and coloring.m > 1:
                coloring = _permuted(coloring, state.rng)
            schedule = enforce_min_coverage(coloring, graph, state.cfg.f_min)
        except DegenerateMatrixError:
            graph, coloring, schedule = _fallback_schedule(state.cfg, tau)
        state.graph = graph
        state.coloring = coloring
        state.schedule = schedule
        if state.cfg.freeze_after_first_coloring and tau < 1.0:
            state.frozen = True
    state.r += 1
    state.tau = tau
    return state


def _descent_hook(gradients) -> None:
    """Assumption-free aggregate-descent check on the applied gradients."""
    if not gradients:
        return
    total = np.zeros_like(gradients[0])
    sq = 0.0
    for g in gradients:
        total += g
        sq += float(g @ g)
    lhs = float(total @ total)
    rhs = (1.0 - tau_eff(gradients)) * sq
    if lhs < rhs - 1e-9 * max(sq, 1.0):
        raise RuntimeError(
            f"aggregate descent bound violated: |sum|^2={lhs} < {rhs}"
        )


def _window_record(state: SchedulerState, t_start: int) -> WindowRecord:
    return WindowRecord(
        r=state.r,
        t_start=t_start,
        tau=float(state.tau),
        m=state.schedule.m,
        edges=tuple(sorted(state.graph.edges)),
        color_of=state.coloring.color_of,
        classes=state.coloring.classes,
        extra_slots=tuple(
            (s, tuple(ts)) for s, ts in sorted(state.schedule.extra_slots.items())
        ),
        coverage_failures=state.schedule.coverage_failures,
        frozen=state.frozen,
    )


def run(
    cfg: SchedulerConfig,
    oracle,
    combinators: CombinatorConfig | None = None,
    graph_builder=None,
    flops: dict | None = None,
) -> RunRecord:
    """Execute T steps and return the full log.

    Refreshes fire exactly when ``(t+1) % R == 0``, using the threshold of the
    triggering step; the rebuilt schedule serves steps t+1 onward.
    """
    record = RunRecord(
        config=cfg.to_dict(),
        combinator_mode=(combinators.mode if combinators else "none"),
        flops=flops if flops is not None else {},
    )
    if cfg.T == 0:
        return record
    theta0 = oracle.init_theta() if hasattr(oracle, "init_theta") else None
    state = init_state(cfg, theta0, combinators)
    record.windows.append(_window_record(state, t_start=0))
    eta = cfg.step_size()
    clock = getattr(oracle, "set_time", None)
    for t in range(cfg.T):
        if clock is not None:
            clock(t)
        tau_t = anneal_tau(t, cfg)
        tasks = active_set(state, t)
        m_t = state.schedule.m
        grads = {
            k: np.asarray(oracle.gradient(k, state.theta, state.rng), dtype=np.float64)
            for k in tasks
        }
        loss = float(oracle.loss(state.theta))
        applied = apply_combinators(
            tasks, [grads[k] for k in tasks], combinators, state.scale_state, state.rng
        )
        _descent_hook(applied)
        apply_update(state, tasks, dict(zip(tasks, applied)), None, eta)
        for k in tasks:
            update_ema(state.stats, k, grads[k])
        did_refresh = (t + 1) % cfg.R == 0
        if did_refresh:
            if clock is not None:
                clock(t + 1)
            probes = [oracle.gradient(k, state.theta, state.rng) for k in range(cfg.K)]
            refresh(state, probes, anneal_tau(t, cfg), graph_builder)
            state.t_r = t + 1
            record.windows.append(_window_record(state, t_start=t + 1))
        gnorm = float(np.linalg.norm(np.sum(applied, axis=0))) if applied else 0.0
        record.steps.append(
            StepRow(
                t=t,
                tau=float(tau_t),
                m=m_t,
                active_mask=active_mask(tasks),
                loss=loss,
                grad_norm=gnorm,
                refresh=did_refresh,
            )
        )
    return record
