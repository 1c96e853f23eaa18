"""Stochastic engines: multigraph evolution and the structure-free chain ensemble."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import ConfigError, Deadlock, InfeasibleSeed, RateOverflow
from .kernels import InitialDegreeLaw, KernelParams, ModelPreset
from .rng import RNG_ALGORITHM, UniformStream, replica_rng

__all__ = [
    "NetworkState",
    "SimConfig",
    "RunResult",
    "ChainEnsemble",
    "ChainEnsembleResult",
    "POLICIES",
    "seed_graph",
    "step_model1",
    "step_model2",
    "step_model3",
    "sample_preferential",
    "run_replica",
    "run_model",
    "chain_start_time",
    "run_chain_ensemble",
    "write_snapshots_csv",
    "write_metadata",
]

POLICIES = ("allow", "resample")
CHECK_EVERY = 1 << 16
MAX_REDRAWS = 10_000


class NetworkState:
    """Undirected multigraph with O(1) edge insertion and removal.

    Edge ``e`` owns the stubs ``2e`` and ``2e + 1``; ``ends[s]`` is the node
    at stub ``s``, ``inc[v]`` lists the stubs at node ``v`` and ``slot[s]``
    is the position of ``s`` inside ``inc[ends[s]]``.  Removing an edge moves
    the last edge into its slot.  ``hist[k]`` counts nodes of degree ``k``.
    """

    __slots__ = ("ends", "slot", "inc", "hist", "mult", "t", "base_degree", "rewire_skipped")

    def __init__(self):
        self.ends: list[int] = []
        self.slot: list[int] = []
        self.inc: list[list[int]] = []
        self.hist: list[int] = [0]
        self.mult: dict[tuple[int, int], int] = {}
        self.t = 0
        self.base_degree = 0
        self.rewire_skipped = 0

    @property
    def n_nodes(self) -> int:
        return len(self.inc)

    @property
    def n_edges(self) -> int:
        return len(self.ends) >> 1

    @property
    def total_degree(self) -> int:
        return len(self.ends)

    def degree(self, v: int) -> int:
        return len(self.inc[v])

    def degrees(self) -> np.ndarray:
        return np.fromiter((len(x) for x in self.inc), dtype=np.int64, count=len(self.inc))

    def histogram(self) -> np.ndarray:
        return np.trim_zeros(np.asarray(self.hist, dtype=np.int64), "b")

    def neighbors(self, v: int) -> list[int]:
        """Neighbour multiset of ``v`` (a self-loop lists ``v`` twice)."""
        return [self.ends[s ^ 1] for s in self.inc[v]]

    def add_node(self) -> int:
        self.inc.append([])
        self.hist[0] += 1
        return len(self.inc) - 1

    def _bump(self, v, delta):
        k = len(self.inc[v])
        hist = self.hist
        hist[k - delta] -= 1
        if k >= len(hist):
            hist.append(0)
        hist[k] += 1

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.mult if u <= v else (v, u) in self.mult

    def add_edge(self, u: int, v: int) -> int:
        s = len(self.ends)
        self.ends.append(u)
        self.ends.append(v)
        iu = self.inc[u]
        self.slot.append(len(iu))
        iu.append(s)
        self._bump(u, 1)
        iv = self.inc[v]
        self.slot.append(len(iv))
        iv.append(s + 1)
        self._bump(v, 1)
        key = (u, v) if u <= v else (v, u)
        self.mult[key] = self.mult.get(key, 0) + 1
        return s >> 1

    def _unlink(self, s):
        v = self.ends[s]
        lst = self.inc[v]
        pos = self.slot[s]
        last = lst.pop()
        if last != s:
            lst[pos] = last
            self.slot[last] = pos

    def remove_edge(self, e: int) -> tuple[int, int]:
        ends, slot = self.ends, self.slot
        s = 2 * e
        u, v = ends[s], ends[s + 1]
        self._unlink(s)
        self._bump(u, -1)
        self._unlink(s + 1)
        self._bump(v, -1)
        key = (u, v) if u <= v else (v, u)
        c = self.mult[key] - 1
        if c:
            self.mult[key] = c
        else:
            del self.mult[key]
        last = len(ends) - 2
        if s != last:
            for side in (0, 1):
                src, dst = last + side, s + side
                w = ends[src]
                ends[dst] = w
                slot[dst] = slot[src]
                self.inc[w][slot[src]] = dst
        del ends[-2:]
        del slot[-2:]
        return u, v

    def check(self) -> None:
        """Recount degrees and pair multiplicities from the stub table."""
        deg = np.bincount(np.asarray(self.ends, dtype=np.int64), minlength=self.n_nodes)
        if not np.array_equal(deg, self.degrees()):
            raise AssertionError("incidence lists disagree with the edge table")
        recount = np.bincount(deg, minlength=len(self.hist))
        if not np.array_equal(recount, np.asarray(self.hist)):
            raise AssertionError("degree histogram disagrees with a recount")
        for s, v in enumerate(self.ends):
            if self.inc[v][self.slot[s]] != s:
                raise AssertionError("stale stub slot")
        if sum(self.mult.values()) != self.n_edges:
            raise AssertionError("edge multiplicities disagree with the edge table")


# ---------------------------------------------------------------------------
# seeds and moves


def seed_graph(preset: ModelPreset) -> NetworkState:
    """Deterministic start: circulant graph (variants 1-2) or isolated nodes (3)."""
    state = NetworkState()
    m0, n0 = preset.m0, preset.N0
    for _ in range(m0):
        state.add_node()
    if preset.variant == "add_rewire":
        return state
    if n0 % 2 or n0 > m0 * (m0 - 1) or n0 % m0:
        raise InfeasibleSeed(
            f"no circulant seed with m0={m0} nodes and total degree N0={n0} "
            "(need N0 even, divisible by m0 and <= m0(m0-1))"
        )
    r = n0 // m0
    if r % 2 and m0 % 2:
        raise InfeasibleSeed(f"odd degree {r} on an odd number of nodes")
    for i in range(m0):
        for off in range(1, r // 2 + 1):
            state.add_edge(i, (i + off) % m0)
    if r % 2:
        for i in range(m0 // 2):
            state.add_edge(i, i + m0 // 2)
    state.base_degree = state.total_degree
    return state


def sample_preferential(state: NetworkState, u: UniformStream) -> int:
    """Node chosen with probability ``k_i / sum_j k_j`` (uniform random stub)."""
    if not state.ends:
        raise Deadlock("no edges to attach preferentially")
    return state.ends[u.below(len(state.ends))]


def _sample_kplus1(state, u):
    n = len(state.inc)
    r = u.below(n + len(state.ends))
    return r if r < n else state.ends[r - n]


def _check_policy(policy):
    if policy not in POLICIES:
        raise ConfigError(f"multi_edge_policy must be one of {POLICIES}")


def _grow(state: NetworkState, m: int, u: UniformStream, policy: str, alpha: float | None) -> None:
    """New node with ``m`` edges; targets drawn from the graph before the step.

    ``alpha`` is the weight of the preferential part of a preferential/uniform
    mixture (``None`` means purely preferential).
    """
    ends = state.ends
    n_old = len(state.inc)
    n_stubs = len(ends)
    if n_stubs == 0 and (alpha is None or alpha >= 1):
        raise Deadlock("no edges to attach preferentially")
    if policy == "resample":
        eligible = n_old if alpha is not None else n_old - state.hist[0]
        if eligible < m:
            raise Deadlock(f"only {eligible} eligible targets for {m} distinct edges")
    targets: list[int] = []
    tries = 0
    while len(targets) < m:
        if alpha is None or (n_stubs and u.random() < alpha):
            j = ends[u.below(n_stubs)]
        else:
            j = u.below(n_old)
        if policy == "resample" and j in targets:
            tries += 1
            if tries > MAX_REDRAWS:
                raise Deadlock("could not find distinct targets")
            continue
        targets.append(j)
    new = state.add_node()
    for j in targets:
        state.add_edge(new, j)


def _delete_edge(state: NetworkState, u: UniformStream) -> None:
    if not state.ends:
        raise Deadlock("no edge to delete")
    i = state.ends[u.below(len(state.ends))]
    stubs = state.inc[i]
    # i has positive degree by construction of the preferential draw
    s = stubs[u.below(len(stubs))]
    state.remove_edge(s >> 1)


def _conserve(state: NetworkState, m: int) -> None:
    expected = 2 * (m - 1) * state.t + state.base_degree
    if state.total_degree != expected:
        raise AssertionError(
            f"total degree {state.total_degree} != 2(m-1)t + N0 = {expected} at t={state.t}"
        )


def step_model1(state: NetworkState, m: int, rng: UniformStream, policy: str = "resample") -> NetworkState:
    """Grow by one node with ``m`` preferential edges, then delete one edge."""
    _grow(state, m, rng, policy, None)
    _delete_edge(state, rng)
    state.t += 1
    _conserve(state, m)
    return state


def group_weight(m: int, m0: int, t: int) -> float:
    """Preferential share of each draw so that ``m`` draws give the group kernel."""
    return (m0 + t - m) / (m * (m0 + t - 1))


def step_model2(
    state: NetworkState, m: int, rng: UniformStream, policy: str = "resample", m0: int | None = None
) -> NetworkState:
    """As :func:`step_model1` with the preferential/uniform group kernel."""
    t = state.t + 1
    m0 = state.n_nodes - state.t if m0 is None else m0
    _grow(state, m, rng, policy, group_weight(m, m0, t))
    _delete_edge(state, rng)
    state.t = t
    _conserve(state, m)
    return state


def _attach_end(state, i, u, policy):
    """End node for a new edge at ``i`` drawn from the (k+1) kernel."""
    for _ in range(MAX_REDRAWS):
        j = _sample_kplus1(state, u)
        if policy == "allow" or (j != i and not state.has_edge(i, j)):
            return j
    raise Deadlock(f"node {i} has no admissible partner")


def step_model3(
    state: NetworkState, m: int, p: float, q: float, rng: UniformStream, policy: str = "resample"
) -> NetworkState:
    """Add a node, then add ``m`` edges (prob p), rewire ``m`` edges (prob q) or wire the node."""
    new = state.add_node()
    x = rng.random()
    if x < p:
        n = state.n_nodes
        for _ in range(m):
            i = rng.below(n)
            state.add_edge(i, _attach_end(state, i, rng, policy))
    elif x < p + q:
        n = state.n_nodes
        for _ in range(m):
            i = rng.below(n)
            stubs = state.inc[i]
            if not stubs:
                state.rewire_skipped += 1
                continue
            s = stubs[rng.below(len(stubs))]
            # i gives up its end of the edge; the far end j keeps it
            j = state.ends[s ^ 1]
            state.remove_edge(s >> 1)
            state.add_edge(j, _attach_end(state, j, rng, policy))
    else:
        if policy == "resample" and new < m:
            raise Deadlock(f"only {new} nodes for {m} distinct edges")
        targets: list[int] = []
        for _ in range(MAX_REDRAWS):
            if len(targets) == m:
                break
            j = _sample_kplus1(state, rng)
            if j == new or (policy == "resample" and j in targets):
                continue
            targets.append(j)
        else:
            raise Deadlock("could not find distinct targets")
        for j in targets:
            state.add_edge(new, j)
    state.t += 1
    return state


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class SimConfig:
    preset: ModelPreset
    T: int
    R: int = 1
    seed: int = 0
    multi_edge_policy: str = "resample"
    snapshots: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("T", "R", "seed"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer")
        if self.T < 1 or self.R < 1:
            raise ConfigError("need T >= 1 and R >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        _check_policy(self.multi_edge_policy)
        snaps = tuple(sorted(set(int(s) for s in self.snapshots) | {int(self.T)}))
        if snaps[0] < 1 or snaps[-1] > self.T:
            raise ConfigError("snapshot times must lie in [1, T]")
        object.__setattr__(self, "snapshots", snaps)

    def to_dict(self) -> dict:
        return {
            "preset": self.preset.to_dict(),
            "T": int(self.T),
            "R": int(self.R),
            "seed": int(self.seed),
            "multi_edge_policy": self.multi_edge_policy,
            "snapshots": list(self.snapshots),
        }

    @classmethod
    def from_dict(cls, data) -> "SimConfig":
        try:
            return cls(
                preset=ModelPreset.from_dict(data["preset"]),
                T=data["T"],
                R=data.get("R", 1),
                seed=data.get("seed", 0),
                multi_edge_policy=data.get("multi_edge_policy", "resample"),
                snapshots=tuple(data.get("snapshots", ())),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None


@dataclass
class RunResult:
    """Degree histograms ``snapshots[replica][t]`` plus run statistics."""

    config: SimConfig
    snapshots: list[dict[int, np.ndarray]]
    stats: list[dict] = field(default_factory=list)

    def pooled(self, t: int | None = None) -> np.ndarray:
        t = self.config.T if t is None else t
        return _pool(s[t] for s in self.snapshots)


def _pool(hists: Iterable[np.ndarray]) -> np.ndarray:
    hists = list(hists)
    out = np.zeros(max(len(h) for h in hists), dtype=np.int64)
    for h in hists:
        out[: len(h)] += h
    return out


def run_replica(config: SimConfig, replica: int, check_every: int = CHECK_EVERY):
    """One replica; returns ``({t: histogram}, stats)``."""
    preset = config.preset
    stream = UniformStream(replica_rng(config.seed, replica))
    state = seed_graph(preset)
    m, policy = preset.m, config.multi_edge_policy
    snaps = set(config.snapshots)
    out: dict[int, np.ndarray] = {}
    variant = preset.variant
    p, q = float(preset.p), float(preset.q)
    for t in range(1, config.T + 1):
        if variant == "BA_with_deletion":
            step_model1(state, m, stream, policy)
        elif variant == "group_pref_with_deletion":
            step_model2(state, m, stream, policy, preset.m0)
        else:
            step_model3(state, m, p, q, stream, policy)
        if t % check_every == 0:
            state.check()
        if t in snaps:
            out[t] = state.histogram()
    stats = {"rewire_skipped": state.rewire_skipped, "nodes": state.n_nodes, "edges": state.n_edges}
    return out, stats


def run_model(config: SimConfig) -> RunResult:
    snapshots, stats = [], []
    for r in range(config.R):
        h, s = run_replica(config, r)
        snapshots.append(h)
        stats.append(s)
    return RunResult(config, snapshots, stats)


# ---------------------------------------------------------------------------
# chain ensemble


def chain_start_time(params: KernelParams, law: InitialDegreeLaw, degree_cap: int = 10_000) -> int:
    """First birth time for which every reachable move has ``f+ + f- <= 1``.

    A node born at ``i >= t0`` with degree ``<= M`` has degree at most
    ``min(cap, M + v - 1 - t0)`` when it moves at step ``v``.  With slope
    ``c = A + Abar`` the binding step is the first one if ``c <= 1`` and the
    one where the cap is reached otherwise.
    """
    A, B, Ab, Bb = params.as_floats()
    c, d, M = A + Ab, B + Bb, law.M
    if degree_cap < M:
        raise ConfigError("degree cap below the newborn support")
    if c <= 1:
        t0 = c * M + d - 1
    else:
        t0 = c * degree_cap + d - degree_cap + M - 1
    return max(1, M, math.ceil(t0 - 1e-12))


@dataclass
class ChainEnsemble:
    """One replica: birth times and degrees at each snapshot (``-1`` = unborn)."""

    birth: np.ndarray
    degree_at: dict[int, np.ndarray]
    overflow_at: dict[int, int]

    @property
    def t(self) -> int:
        return max(self.degree_at)

    def histogram(self, t: int, cap: int) -> np.ndarray:
        d = self.degree_at[t]
        d = d[(d >= 0) & (d < cap)]
        return np.bincount(d, minlength=1)


@dataclass
class ChainEnsembleResult:
    t0: int
    degree_cap: int
    snapshots: tuple[int, ...]
    replicas: list[ChainEnsemble]

    def histogram(self, t: int, replica: int) -> np.ndarray:
        return self.replicas[replica].histogram(t, self.degree_cap)

    def pooled(self, t: int | None = None) -> np.ndarray:
        t = self.snapshots[-1] if t is None else t
        return _pool(r.histogram(t, self.degree_cap) for r in self.replicas)

    def overflow(self, t: int | None = None) -> int:
        t = self.snapshots[-1] if t is None else t
        return sum(r.overflow_at[t] for r in self.replicas)


def _log_survival(s, u, r):
    """``log prod_{v=s+1}^{u} (1 - r/v)``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return special.gammaln(u + 1 - r) - special.gammaln(s + 1 - r) - special.gammaln(u + 1) + special.gammaln(s + 1)


def _next_jump(s, r, log_u, T):
    """Smallest step ``v > s`` at which a node with total rate ``r`` moves (``T + 1`` if none)."""
    hi = np.full(s.shape, float(T))
    no_jump = _log_survival(s, hi, r) > log_u
    lo = s.astype(float)
    # invariant: survival(lo) > U >= survival(hi)
    while True:
        gap = (hi - lo > 1) & ~no_jump
        if not gap.any():
            break
        mid = np.floor((lo + hi) / 2)
        hit = _log_survival(s, mid, r) <= log_u
        hi = np.where(gap & hit, mid, hi)
        lo = np.where(gap & ~hit, mid, lo)
    return np.where(no_jump, T + 1, hi).astype(np.int64)


def run_chain_ensemble(
    params: KernelParams,
    law: InitialDegreeLaw,
    T: int,
    R: int,
    seed: int,
    snapshots: Sequence[int] = (),
    degree_cap: int = 10_000,
) -> ChainEnsembleResult:
    """Independent degree chains with step probabilities ``F+(k)/t`` and ``F-(k)/t``.

    One node is born per step from ``t0`` (see :func:`chain_start_time`) to
    ``T``.  Chains do not interact, so each node is advanced jump by jump:
    the step of its next move is drawn by inverting the exact survival
    product ``prod (1 - r/v)``, all nodes in one vectorised pass per jump.
    Nodes reaching ``degree_cap`` stop and are reported as overflow.
    """
    t0 = chain_start_time(params, law, degree_cap)
    if T < t0:
        raise ConfigError(f"T={T} is below the rate-validity start time t0={t0}")
    if R < 1:
        raise ConfigError("R must be >= 1")
    snaps = tuple(sorted(set(int(s) for s in snapshots) | {int(T)}))
    if snaps[0] < t0:
        raise ConfigError(f"snapshot {snaps[0]} precedes t0={t0}")
    A, B, Ab, Bb = params.as_floats()
    support = np.arange(law.M + 1)
    probs = np.asarray(law.as_array(), dtype=float)
    probs = probs / probs.sum()
    reps = []
    for rep in range(R):
        gen = replica_rng(seed, rep)
        birth = np.arange(t0, T + 1, dtype=np.int64)
        n = birth.size
        deg = gen.choice(support, size=n, p=probs).astype(np.int64)
        cur = birth.copy()
        at = {ts: np.full(n, -1, dtype=np.int64) for ts in snaps}
        active = np.arange(n)
        while active.size:
            k = deg[active]
            s = cur[active]
            up = A * k + B
            down = np.where(k > 0, Ab * k + Bb, 0.0)
            r = up + down
            if np.any(r > s + 1 + 1e-9):
                bad = int(np.argmax(r - s))
                raise RateOverflow(f"rate {r[bad]:.6g} exceeds step {s[bad] + 1} at degree {k[bad]}")
            frozen = (k >= degree_cap) | (r <= 0)
            log_u = np.log(gen.random(active.size))
            nxt = np.full(active.size, T + 1, dtype=np.int64)
            live = ~frozen
            if live.any():
                nxt[live] = _next_jump(s[live], r[live], log_u[live], T)
            for ts, arr in at.items():
                hit = (s <= ts) & (nxt > ts)
                arr[active[hit]] = k[hit]
            moving = nxt <= T
            if not moving.any():
                break
            idx = active[moving]
            go_up = gen.random(idx.size) * r[moving] < up[moving]
            deg[idx] += np.where(go_up, 1, -1)
            cur[idx] = nxt[moving]
            active = idx
        overflow = {ts: int(np.count_nonzero(arr >= degree_cap)) for ts, arr in at.items()}
        reps.append(ChainEnsemble(birth=birth, degree_at=at, overflow_at=overflow))
    return ChainEnsembleResult(t0=t0, degree_cap=degree_cap, snapshots=snaps, replicas=reps)


# ---------------------------------------------------------------------------
# output


def write_snapshots_csv(path, snapshots: Sequence[dict[int, np.ndarray]]) -> None:
    """Rows ``t,k,count,replica`` for every non-zero histogram entry."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "count", "replica"])
        for rep, snaps in enumerate(snapshots):
            for t in sorted(snaps):
                h = snaps[t]
                for k in np.flatnonzero(h):
                    w.writerow([t, int(k), int(h[k]), rep])


def read_snapshots_csv(path) -> dict[int, dict[int, np.ndarray]]:
    """Inverse of :func:`write_snapshots_csv`: ``{replica: {t: hist}}``."""
    rows: dict[int, dict[int, dict[int, int]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["t", "k", "count", "replica"]:
            raise ConfigError(f"{path}: expected header t,k,count,replica")
        for row in reader:
            t, k, c, rep = (int(row[x]) for x in ("t", "k", "count", "replica"))
            rows.setdefault(rep, {}).setdefault(t, {})[k] = c
    out = {}
    for rep, by_t in rows.items():
        out[rep] = {}
        for t, counts in by_t.items():
            h = np.zeros(max(counts) + 1, dtype=np.int64)
            for k, c in counts.items():
                h[k] = c
            out[rep][t] = h
    return out


def write_metadata(path, config: dict, extra: dict | None = None) -> None:
    meta = {"config": config, "rng": RNG_ALGORITHM, "rng_key": "seed + (replica << 64)"}
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
