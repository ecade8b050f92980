"""Stochastic coalescent simulation and the dual uniform-split fragmentation.

The constant-kernel process on n particles runs with the per-pair rate 1/n
(slowing time n-fold leaves the combinatorial merger tree unchanged and
matches the hydrodynamic normalization); waiting times between events are
exponential with the total rate C(m,2)/n while m clusters remain, and the
merging pair is uniform.  General symmetric kernels run as exact Gillespie
simulations, with the constant kernel short-circuited to the uniform-pair
path so equal seeds give identical merger sequences.

Every simulation is a deterministic function of its seed; replicate batches
should derive per-replicate substreams via :func:`coaltree.rng.substream`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .rng import as_generator
from .treecore import RootedTree

__all__ = [
    "Kernel",
    "CoalescentTrajectory",
    "EtaPath",
    "simulate_kingman",
    "simulate_general",
    "simulate_uniform_fragmentation",
    "order_count_trajectories",
    "trajectory_to_csv",
]


class Kernel:
    """Symmetric positive collision rate K(i, j) on integer masses."""

    def __init__(self, name: str, fn=None, table=None, constant_value=None):
        self.name = name
        self._fn = fn
        self._table = table
        self.constant_value = constant_value
        if table is not None:
            table = np.asarray(table, dtype=np.float64)
            if table.ndim != 2 or table.shape[0] != table.shape[1]:
                raise DomainError("kernel table must be square")
            if not np.allclose(table, table.T):
                raise DomainError("kernel table must be symmetric")
            if np.any(table <= 0):
                raise DomainError("kernel rates must be positive")
            self._table = table

    @classmethod
    def constant(cls, value: float = 1.0) -> "Kernel":
        if value <= 0:
            raise DomainError("kernel rates must be positive")
        return cls("constant", constant_value=float(value))

    @classmethod
    def additive(cls) -> "Kernel":
        return cls("additive", fn=lambda i, j: float(i + j))

    @classmethod
    def multiplicative(cls) -> "Kernel":
        return cls("multiplicative", fn=lambda i, j: float(i * j))

    @classmethod
    def tabulated(cls, table) -> "Kernel":
        return cls("tabulated", table=table)

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    @property
    def max_mass(self) -> float:
        if self._table is not None:
            return self._table.shape[0]
        return math.inf

    def rate(self, i: int, j: int) -> float:
        if i < 1 or j < 1:
            raise DomainError("masses must be >= 1")
        if self.constant_value is not None:
            return self.constant_value
        if self._table is not None:
            if i > self._table.shape[0] or j > self._table.shape[0]:
                raise DomainError(
                    f"kernel table covers masses up to {self._table.shape[0]}, "
                    f"requested K({i},{j})"
                )
            return float(self._table[i - 1, j - 1])
        return self._fn(i, j)

    def matrix(self, max_mass: int) -> np.ndarray:
        """Dense (max_mass x max_mass) rate matrix for masses 1..max_mass."""
        if self._table is not None:
            if max_mass > self._table.shape[0]:
                raise DomainError(
                    f"kernel table covers masses up to {self._table.shape[0]}"
                )
            return self._table[:max_mass, :max_mass].copy()
        if self.constant_value is not None:
            return np.full((max_mass, max_mass), self.constant_value)
        m = np.arange(1, max_mass + 1, dtype=np.float64)
        return np.vectorize(self._fn)(m[:, None], m[None, :]).astype(np.float64)

    def __repr__(self):
        return f"Kernel({self.name})"


@dataclass
class CoalescentTrajectory:
    """Full record of one coalescent run: n-1 merge events in time order and
    the resulting time-oriented tree (leaves 0..n-1 with mark 0, internal
    vertex n-1+e created by event e with the event time as mark)."""

    n: int
    times: np.ndarray          # (n-1,) strictly increasing event times
    pairs: np.ndarray          # (n-1, 2) merged cluster ids (= tree vertex ids)
    masses: np.ndarray         # (n-1, 2) masses of the merged clusters
    orders: np.ndarray         # (n-1, 2) Horton-Strahler orders of the pair
    tree: RootedTree = field(repr=False)

    @property
    def n_events(self) -> int:
        return self.times.size


def _finalize(n, times, pairs, masses, orders) -> CoalescentTrajectory:
    children = np.full((2 * n - 1, 2), -1, dtype=np.int32)
    marks = np.zeros(2 * n - 1)
    children[n:, 0] = pairs[:, 0]
    children[n:, 1] = pairs[:, 1]
    marks[n:] = times
    tree = RootedTree(children, marks)
    return CoalescentTrajectory(n, times, pairs, masses, orders, tree)


def _merge_loop(n, waits, u1, u2, rate_per_pair):
    """Shared merger loop: uniform unordered pair via swap-remove active list.

    ``waits`` are standard-exponential draws; the wait before event e (with
    m = n - e clusters) is waits[e] / (rate_per_pair * C(m,2)).
    """
    ms = np.arange(n, 1, -1, dtype=np.float64)
    times = np.cumsum(waits / (rate_per_pair * (ms * (ms - 1.0) / 2.0)))
    active = list(range(n))
    mass = [1] * n + [0] * (n - 1)
    order = [1] * n + [0] * (n - 1)
    pairs = np.empty((n - 1, 2), dtype=np.int64)
    masses = np.empty((n - 1, 2), dtype=np.int64)
    orders = np.empty((n - 1, 2), dtype=np.int64)
    for e in range(n - 1):
        i = int(u1[e])
        j = int(u2[e])
        if j >= i:
            j += 1
        a, b = active[i], active[j]
        pairs[e, 0], pairs[e, 1] = a, b
        ma, mb = mass[a], mass[b]
        oa, ob = order[a], order[b]
        masses[e, 0], masses[e, 1] = ma, mb
        orders[e, 0], orders[e, 1] = oa, ob
        new = n + e
        mass[new] = ma + mb
        order[new] = oa + 1 if oa == ob else max(oa, ob)
        active[i] = new
        active[j] = active[-1]
        active.pop()
    return times, pairs, masses, orders


def simulate_kingman(n: int, seed) -> CoalescentTrajectory:
    """Constant-kernel coalescent on n particles with per-pair rate 1/n."""
    if n < 1:
        raise DomainError("need at least one particle")
    rng = as_generator(seed)
    if n == 1:
        empty = np.empty((0, 2), dtype=np.int64)
        return _finalize(1, np.empty(0), empty, empty.copy(), empty.copy())
    ms = np.arange(n, 1, -1)
    waits = rng.standard_exponential(n - 1)
    u1 = rng.integers(0, ms)
    u2 = rng.integers(0, ms - 1)
    return _finalize(n, *_merge_loop(n, waits, u1, u2, rate_per_pair=1.0 / n))


def simulate_general(n: int, kernel: Kernel, seed, rescale: bool = False) -> CoalescentTrajectory:
    """Exact Gillespie simulation under a symmetric collision kernel.

    Pair selection is proportional to K(mass_a, mass_b); a constant kernel
    reduces to the uniform-pair path of :func:`simulate_kingman` (identical
    merger sequence for the same seed, times scaled by the rate).  With
    ``rescale`` the rates are divided by n, matching the constant-kernel
    time convention.
    """
    if n < 1:
        raise DomainError("need at least one particle")
    if kernel.max_mass < n:
        raise DomainError(
            f"kernel defined up to mass {kernel.max_mass}, need {n}"
        )
    rng = as_generator(seed)
    if n == 1:
        empty = np.empty((0, 2), dtype=np.int64)
        return _finalize(1, np.empty(0), empty, empty.copy(), empty.copy())
    scale = (1.0 / n) if rescale else 1.0
    if kernel.is_constant:
        ms = np.arange(n, 1, -1)
        waits = rng.standard_exponential(n - 1)
        u1 = rng.integers(0, ms)
        u2 = rng.integers(0, ms - 1)
        rate = kernel.constant_value * scale
        return _finalize(n, *_merge_loop(n, waits, u1, u2, rate_per_pair=rate))

    # general kernel: per-cluster partial rate sums, O(m) per event
    active = list(range(n))
    mass = [1] * n + [0] * (n - 1)
    order = [1] * n + [0] * (n - 1)
    kr = kernel.rate
    partial = {c: 0.0 for c in active}  # S_c = sum_{d != c} K(m_c, m_d)
    for ia, a in enumerate(active):
        for b in active[ia + 1 :]:
            r = kr(mass[a], mass[b])
            partial[a] += r
            partial[b] += r
    t = 0.0
    times = np.empty(n - 1)
    pairs = np.empty((n - 1, 2), dtype=np.int64)
    masses = np.empty((n - 1, 2), dtype=np.int64)
    orders = np.empty((n - 1, 2), dtype=np.int64)
    for e in range(n - 1):
        total = sum(partial[c] for c in active) / 2.0
        t += rng.standard_exponential() / (total * scale)
        times[e] = t
        # walk the ordered-pair mass 2*total: first cluster by partial sums
        r = rng.random() * 2.0 * total
        acc = 0.0
        a = active[-1]
        for c in active:
            acc += partial[c]
            if r < acc:
                a = c
                break
        r2 = rng.random() * partial[a]
        acc = 0.0
        b = None
        for c in active:
            if c == a:
                continue
            acc += kr(mass[a], mass[c])
            if r2 < acc:
                b = c
                break
        if b is None:  # numerical edge of the cumulative walk
            b = next(c for c in reversed(active) if c != a)
        pairs[e] = (a, b)
        masses[e] = (mass[a], mass[b])
        orders[e] = (order[a], order[b])
        new = n + e
        mass[new] = mass[a] + mass[b]
        order[new] = order[a] + 1 if order[a] == order[b] else max(order[a], order[b])
        active.remove(a)
        active.remove(b)
        for c in active:
            d = kr(mass[c], mass[new]) - kr(mass[c], mass[a]) - kr(mass[c], mass[b])
            partial[c] += d
        partial[new] = sum(kr(mass[new], mass[c]) for c in active)
        active.append(new)
    return _finalize(n, times, pairs, masses, orders)


def simulate_uniform_fragmentation(n: int, seed) -> RootedTree:
    """Top-down combinatorial tree: mass m splits into (x, m-x) with x
    uniform on 1..m-1.  Shape-equivalent to the constant-kernel coalescent."""
    if n < 1:
        raise DomainError("need at least one particle")
    rng = as_generator(seed)
    children = np.full((2 * n - 1, 2), -1, dtype=np.int32)
    next_id = 1
    stack = [(0, n)]  # (vertex id, mass)
    while stack:
        v, m = stack.pop()
        if m == 1:
            continue
        x = int(rng.integers(1, m))
        left, right = next_id, next_id + 1
        next_id += 2
        children[v, 0] = left
        children[v, 1] = right
        stack.append((right, m - x))
        stack.append((left, x))
    return RootedTree(children[:next_id])


@dataclass
class EtaPath:
    """Step functions of relative cluster counts along one trajectory.

    ``eta[s, j-1]`` is the count of order-j clusters divided by n on
    [times[s], times[s+1]); ``eta_total`` the all-order count over n.
    """

    n: int
    times: np.ndarray      # (n_events + 1,) starting at 0
    eta: np.ndarray        # (n_events + 1, J)
    eta_total: np.ndarray  # (n_events + 1,)

    @property
    def max_order(self) -> int:
        return self.eta.shape[1]


def order_count_trajectories(traj: CoalescentTrajectory) -> EtaPath:
    """Maintain per-order cluster counts through the merge sequence.

    Same-order merge of order j: count_j -= 2, count_{j+1} += 1; cross-order
    merge: the lower count drops by one.  Conservation
    sum_j eta_j(t) = eta_total(t) holds at every step."""
    n = traj.n
    nev = traj.n_events
    jmax = 1 if nev == 0 else int(traj.orders.max()) + 1
    counts = np.zeros((nev + 1, jmax), dtype=np.int64)
    counts[0, 0] = n
    for e in range(nev):
        oa, ob = traj.orders[e]
        row = counts[e].copy()
        if oa == ob:
            row[oa - 1] -= 2
            row[oa] += 1
        else:
            row[min(oa, ob) - 1] -= 1
        counts[e + 1] = row
    times = np.concatenate([[0.0], traj.times])
    eta = counts / float(n)
    return EtaPath(n, times, eta, eta.sum(axis=1))


def trajectory_to_csv(traj: CoalescentTrajectory, fileobj):
    """Event table: (event_index, time, mass_a, mass_b, order_a, order_b)."""
    fileobj.write("event_index,time,mass_a,mass_b,order_a,order_b\n")
    for e in range(traj.n_events):
        fileobj.write(
            f"{e},{traj.times[e]!r},{traj.masses[e,0]},{traj.masses[e,1]},"
            f"{traj.orders[e,0]},{traj.orders[e,1]}\n"
        )
