"""Conflict graph construction, Welsh-Powell coloring, and coverage augmentation.

A conflict graph connects tasks whose interference coefficient exceeds the
threshold tau.  Coloring it groups mutually compatible tasks; the color
classes then rotate as the cyclic training schedule.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grad_stats import InterferenceMatrix


@dataclass(frozen=True)
class ConflictGraph:
    n_vertices: int
    edges: frozenset  # frozenset of (i, j) tuples with i < j
    tau: float

    def __post_init__(self):
        for (i, j) in self.edges:
            if not (0 <= i < j < self.n_vertices):
                raise ValueError(f"bad edge ({i}, {j}) for K={self.n_vertices}")

    @property
    def degrees(self) -> list[int]:
        deg = [0] * self.n_vertices
        for (i, j) in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        a, b = (i, j) if i < j else (j, i)
        return (a, b) in self.edges

    def neighbors(self, v: int) -> set:
        out = set()
        for (i, j) in self.edges:
            if i == v:
                out.add(j)
            elif j == v:
                out.add(i)
        return out

    def to_edge_list(self) -> str:
        """Plain text form: first line K, then one 'i j' line per edge."""
        lines = [str(self.n_vertices)]
        lines += [f"{i} {j}" for (i, j) in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str, tau: float = 1.0) -> "ConflictGraph":
        rows = [ln for ln in text.splitlines() if ln.strip()]
        K = int(rows[0])
        edges = set()
        for ln in rows[1:]:
            i, j = (int(x) for x in ln.split())
            a, b = (i, j) if i < j else (j, i)
            edges.add((a, b))
        return cls(n_vertices=K, edges=frozenset(edges), tau=tau)


def build_graph(matrix: InterferenceMatrix, tau: float) -> ConflictGraph:
    """Threshold the interference matrix: edge (i, j) iff rho[i, j] > tau.

    Strict inequality — boundary equality is a non-edge.  Excluded tasks
    never gain edges and end up as isolated vertices.
    """
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau={tau} outside (0, 1]")
    K = matrix.K
    edges = set()
    idx = np.flatnonzero(matrix.included)
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            i, j = int(idx[a]), int(idx[b])
            if matrix.rho[i, j] > tau:
                edges.add((i, j))
    matrix.tau_used = tau
    return ConflictGraph(n_vertices=K, edges=frozenset(edges), tau=tau)


def max_degree(graph: ConflictGraph) -> int:
    if graph.n_vertices == 0:
        return 0
    return max(graph.degrees)


@dataclass(frozen=True)
class Coloring:
    """Proper vertex coloring with 1-based colors and explicit classes."""

    color_of: tuple        # color_of[v] in 1..m
    m: int
    classes: tuple         # classes[c-1] = sorted tuple of vertices with color c

    def partition(self) -> frozenset:
        """Label-free view for comparing groupings across windows."""
        return frozenset(frozenset(cls) for cls in self.classes)


def welsh_powell(graph: ConflictGraph) -> Coloring:
    """Largest-first greedy coloring.

    Vertices are processed by non-increasing degree (ties broken by ascending
    index); each takes the smallest positive color unused among its already
    colored neighbors.  Uses at most max_degree + 1 colors.
    """
    K = graph.n_vertices
    deg = graph.degrees
    order = sorted(range(K), key=lambda v: (-deg[v], v))
    adj = [set() for _ in range(K)]
    for (i, j) in graph.edges:
        adj[i].add(j)
        adj[j].add(i)
    color = [0] * K
    for v in order:
        taken = {color[u] for u in adj[v] if color[u] > 0}
        c = 1
        while c in taken:
            c += 1
        color[v] = c
    m = max(color) if K else 0
    classes = tuple(
        tuple(sorted(v for v in range(K) if color[v] == c)) for c in range(1, m + 1)
    )
    return Coloring(color_of=tuple(color), m=m, classes=classes)


@dataclass
class AugmentedSchedule:
    """Cyclic schedule: base classes plus duplicated under-covered tasks.

    ``extra_slots[s]`` lists tasks duplicated into slot s (1-based).  A slot's
    active set is its base class union its extras.  Tasks that could not reach
    ``f_min`` appearances per period are recorded in ``coverage_failures``
    rather than raising.
    """

    base_classes: tuple
    f_min: int
    extra_slots: dict = field(default_factory=dict)   # slot (1-based) -> sorted list of tasks
    coverage_failures: tuple = ()

    @property
    def m(self) -> int:
        return len(self.base_classes)

    def slot_tasks(self, slot: int) -> list:
        """All tasks active in 1-based slot, ascending order."""
        base = list(self.base_classes[slot - 1])
        base += self.extra_slots.get(slot, [])
        return sorted(base)

    def active_for_offset(self, offset: int) -> list:
        return self.slot_tasks((offset % self.m) + 1)

    def appearances(self, task: int) -> int:
        return sum(1 for s in range(1, self.m + 1) if task in self.slot_tasks(s))


def enforce_min_coverage(coloring: Coloring, graph: ConflictGraph, f_min: int) -> AugmentedSchedule:
    """Duplicate under-covered tasks into compatible slots.

    Each task starts with one appearance per period (its own class).  Tasks
    needing more are processed in ascending index; slots are scanned in cyclic
    order 1..m and a slot accepts the task only when nothing already in it
    (base class or earlier extras) conflicts with the task.  Failure to reach
    f_min is flagged, not raised.
    """
    if f_min < 1:
        raise ValueError(f"f_min={f_min} must be >= 1")
    sched = AugmentedSchedule(base_classes=coloring.classes, f_min=f_min)
    if f_min == 1 or sched.m == 0:
        return sched
    failures = []
    for task in range(graph.n_vertices):
        count = 1  # own class
        own = coloring.color_of[task]
        for slot in range(1, sched.m + 1):
            if count >= f_min:
                break
            if slot == own:
                continue
            occupants = sched.slot_tasks(slot)
            if any(graph.has_edge(task, u) for u in occupants):
                continue
            sched.extra_slots.setdefault(slot, []).append(task)
            sched.extra_slots[slot].sort()
            count += 1
        if count < f_min:
            failures.append(task)
    sched.coverage_failures = tuple(failures)
    return sched


def is_proper(coloring: Coloring, graph: ConflictGraph) -> bool:
    return all(coloring.color_of[i] != coloring.color_of[j] for (i, j) in graph.edges)
