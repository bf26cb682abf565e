"""Wall-clock benchmark harness.

Protocol: for each configuration, pre-generate one fixed float32 gradient
tensor of shape (steps, K, d); every method consumes the same tensor in the
same order (checksums logged and compared).  Timing wraps only the training
loop around a scalar sink accumulation — tensor generation and probe
synthesis are excluded by construction.  Runs are strictly sequential and
repeated; results report mean +/- standard deviation in seconds.

Absolute times are hardware-dependent and never asserted; only the shape of
the trends is (scheduler cost grows with K and shrinks with R, the uniform
baseline stays nearly flat).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .combinators import CombinatorConfig
from .scheduler import SchedulerConfig, run
from .sketch import FlopCounter, SketchConfig, make_graph_builder

METHODS = ("uniform", "songoku", "songoku+project", "songoku+scale")


@dataclass
class BenchConfig:
    K_values: tuple = (3, 6, 16, 40)
    R_values: tuple = (4, 32, 256)
    d: int = 1024
    steps: int = 900
    repeats: int = 10
    seed: int = 0
    tau_star: float = 0.5
    eta: float = 0.01

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError(f"repeats={self.repeats} must be >= 1")
        if self.steps < 1:
            raise ValueError(f"steps={self.steps} must be >= 1")
        if self.d < 1:
            raise ValueError(f"d={self.d} must be >= 1")


@dataclass
class BenchResult:
    rows: list = field(default_factory=list)

    def add(self, **kw) -> None:
        self.rows.append(kw)

    def select(self, **filters) -> list:
        return [
            row
            for row in self.rows
            if all(row.get(k) == v for k, v in filters.items())
        ]

    def to_csv(self) -> str:
        header = "method,K,R,mean_s,std_s,checksum,flops"
        lines = ["# bench v1", header]
        for row in self.rows:
            lines.append(
                f"{row['method']},{row['K']},{row['R']},{row['mean_s']!r},"
                f"{row['std_s']!r},{row['checksum']!r},{row['flops']}"
            )
        return "\n".join(lines) + "\n"


class _PregenOracle:
    """Serves rows of the pre-generated tensor; generation never happens
    inside the timed region."""

    def __init__(self, grads: np.ndarray):
        self.grads = grads
        self.t = 0
        self.last = grads.shape[0] - 1

    def set_time(self, t: int) -> None:
        self.t = min(t, self.last)

    def gradient(self, task: int, theta, rng):
        return self.grads[self.t, task]

    def loss(self, theta) -> float:
        return 0.0


def _time_uniform(grads: np.ndarray, eta: float) -> tuple:
    steps, K, d = grads.shape
    theta = np.zeros(d)
    sink = 0.0
    start = time.perf_counter()
    for t in range(steps):
        g = grads[t].sum(axis=0)
        theta -= eta * g
        sink += float(theta[0])
    elapsed = time.perf_counter() - start
    return elapsed, sink, 2 * steps * K * d


def _time_songoku(grads: np.ndarray, R: int, tau_star: float, eta: float, mode: str, seed: int) -> tuple:
    steps, K, d = grads.shape
    cfg = SchedulerConfig(
        K=K, d=d, T=steps, R=R, beta=0.9, tau_star=tau_star,
        T_warm=0, eta=eta, seed=seed,
    )
    comb = None if mode == "none" else CombinatorConfig(mode=mode)
    counter = FlopCounter()
    builder = make_graph_builder(SketchConfig(mode="dense"), counter=counter, seed=seed)
    oracle = _PregenOracle(grads)
    start = time.perf_counter()
    record = run(cfg, oracle, combinators=comb, graph_builder=builder)
    elapsed = time.perf_counter() - start
    sink = sum(row.grad_norm for row in record.steps[-8:])
    return elapsed, sink, counter.total()


def run_bench(cfg: BenchConfig, methods=METHODS) -> BenchResult:
    """Time every method on identical pre-generated gradient streams.

    The K sweep runs at the middle R value (or the single configured one);
    the R sweep runs at the largest K.  Rows carry the consumed tensor's
    checksum so fairness is auditable.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
    result = BenchResult()
    r_mid = cfg.R_values[len(cfg.R_values) // 2]
    sweep = [(k, r_mid) for k in cfg.K_values]
    k_max = max(cfg.K_values)
    sweep += [(k_max, r) for r in cfg.R_values if (k_max, r) not in sweep]
    mode_of = {
        "songoku": "none",
        "songoku+project": "project",
        "songoku+scale": "adaptive_scale",
    }
    for K, R in sweep:
        rng = np.random.default_rng(cfg.seed + 1000 * K + R)
        grads = rng.standard_normal((cfg.steps, K, cfg.d)).astype(np.float32)
        checksum = float(np.float64(grads.sum()))
        for method in methods:
            times = []
            flops = 0
            # rep -1 is an untimed warm-up pass (allocator / cache effects).
            for rep in range(-1, cfg.repeats):
                if method == "uniform":
                    elapsed, _, flops = _time_uniform(grads, cfg.eta)
                else:
                    elapsed, _, flops = _time_songoku(
                        grads, R, cfg.tau_star, cfg.eta, mode_of[method], cfg.seed + max(rep, 0)
                    )
                if rep >= 0:
                    times.append(elapsed)
            result.add(
                method=method,
                K=K,
                R=R,
                mean_s=float(np.mean(times)),
                std_s=float(np.std(times)),
                checksum=checksum,
                flops=int(flops),
            )
    return result
