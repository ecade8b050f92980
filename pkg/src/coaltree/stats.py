"""Monte-Carlo harnesses over the tree generators.

Three generators produce combinatorial trees with N leaves that share one
distribution law: the constant-kernel coalescent, the level-set tree of an
extended white noise, and the uniform-split fragmentation.  The harnesses
aggregate Horton branch counts, canonical-shape histograms, empirical
Tokunaga indices and hydrodynamic discrepancies across seeded replicates.

Determinism: replicate r of a batch uses ``substream(base_seed, r)``, so
results depend only on (generator, N, reps, base_seed) and not on scheduling
order; the optional thread pool merely maps the same substreams.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as _chi2

from . import levelset, treecore
from .coalescent import order_count_trajectories, simulate_kingman, simulate_uniform_fragmentation
from .errors import DomainError
from .rng import substream

__all__ = [
    "GENERATORS",
    "BranchStats",
    "ShapeHistogram",
    "EquivalenceResult",
    "TokunagaEstimate",
    "HydroResult",
    "generate_tree",
    "branch_statistics",
    "shape_distribution",
    "equivalence_test",
    "empirical_tokunaga",
    "hydrodynamic_check",
]


def _gen_kingman(n, rng):
    return simulate_kingman(n, rng).tree


def _gen_whitenoise(n, rng):
    w = levelset._draw(n - 1, "uniform01", rng)
    return levelset.level_set_tree(levelset.extend_white_noise(w))


def _gen_fragmentation(n, rng):
    return simulate_uniform_fragmentation(n, rng)


GENERATORS = {
    "kingman": _gen_kingman,
    "whitenoise": _gen_whitenoise,
    "fragmentation": _gen_fragmentation,
}


def generate_tree(generator: str, n: int, rng) -> treecore.RootedTree:
    """One tree with n leaves from the named generator."""
    try:
        fn = GENERATORS[generator]
    except KeyError:
        raise DomainError(f"unknown generator {generator!r}") from None
    return fn(n, rng)


def _map_replicates(fn, reps: int, threads: int = 1) -> list:
    """Indexed map over replicates; reduction order is by index regardless
    of scheduling."""
    if threads <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(reps)))


@dataclass
class BranchStats:
    """Replicate-aggregated branch counts for one generator and size.

    ``mean_ratio[k-1]`` is the mean of N_k/N_1 across replicates (orders a
    tree never reached count as zero); ``cv[k-1]`` the coefficient of
    variation sd(N_k)/mean(N_k) (sample sd), NaN where the mean vanishes.
    """

    generator: str
    n: int
    reps: int
    mean_ratio: np.ndarray
    cv: np.ndarray
    mean_counts: np.ndarray

    @property
    def max_order(self) -> int:
        return self.mean_ratio.size


def branch_statistics(generator: str, n: int, reps: int, base_seed: int,
                      threads: int = 1) -> BranchStats:
    """Horton branch counts per order, averaged over seeded replicates."""
    if n < 2 or reps < 2:
        raise DomainError("need n >= 2 and reps >= 2")

    def one(r):
        tree = generate_tree(generator, n, substream(base_seed, r))
        return treecore.assign_horton_strahler(tree).branch_counts

    counts = _map_replicates(one, reps, threads)
    kmax = max(c.size for c in counts)
    table = np.zeros((reps, kmax))
    for r, c in enumerate(counts):
        table[r, : c.size] = c
    mean = table.mean(axis=0)
    sd = table.std(axis=0, ddof=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cv = np.where(mean > 0, sd / mean, np.nan)
    return BranchStats(generator, n, reps, mean / float(n), cv, mean)


@dataclass
class ShapeHistogram:
    """Counts of canonical combinatorial shapes over replicates."""

    generator: str
    n: int
    reps: int
    counts: dict

    def frequencies(self) -> dict:
        return {k: v / self.reps for k, v in self.counts.items()}


_MAX_HISTOGRAM_N = 12


def shape_distribution(generator: str, n: int, reps: int, base_seed: int,
                       threads: int = 1) -> ShapeHistogram:
    """Histogram of canonical shapes; n is capped so the shape space stays
    enumerable at practical replicate counts."""
    if n > _MAX_HISTOGRAM_N:
        raise DomainError(f"histogram mode supports n <= {_MAX_HISTOGRAM_N}")
    if n < 1 or reps < 1:
        raise DomainError("need n >= 1 and reps >= 1")

    def chunk(r):
        tree = generate_tree(generator, n, substream(base_seed, r))
        return treecore.canonical_shape(tree)

    counts: dict = {}
    for enc in _map_replicates(chunk, reps, threads):
        counts[enc] = counts.get(enc, 0) + 1
    return ShapeHistogram(generator, n, reps, counts)


@dataclass
class EquivalenceResult:
    chi2: float
    dof: int
    p_value: float
    tv_distance: float
    n_cells: int
    pooled_cells: int


def equivalence_test(a: ShapeHistogram, b: ShapeHistogram) -> EquivalenceResult:
    """Two-sample chi-square test that two histograms share one law.

    Cells with pooled expected count below 5 are merged rarest-first into a
    single cell before the test; the total-variation distance is reported on
    the raw (unpooled) cells.
    """
    if a.n != b.n:
        raise DomainError("histograms have different leaf counts")
    keys = sorted(set(a.counts) | set(b.counts))
    ca = np.array([a.counts.get(k, 0) for k in keys], dtype=np.float64)
    cb = np.array([b.counts.get(k, 0) for k in keys], dtype=np.float64)
    na, nb = ca.sum(), cb.sum()
    tv = 0.5 * float(np.sum(np.abs(ca / na - cb / nb)))
    # pool rarest-first until every pooled expected count is >= 5
    order = np.argsort(ca + cb)
    ca, cb = ca[order], cb[order]
    while ca.size > 1:
        tot = ca + cb
        exp_min = min(na, nb) / (na + nb) * tot[0]
        if exp_min >= 5.0:
            break
        ca = np.concatenate([[ca[0] + ca[1]], ca[2:]])
        cb = np.concatenate([[cb[0] + cb[1]], cb[2:]])
        order2 = np.argsort(ca + cb)
        ca, cb = ca[order2], cb[order2]
    if ca.size < 2:
        raise DomainError("not enough distinct shapes after pooling for a test")
    pooled = len(keys) - ca.size
    tot = ca + cb
    stat = 0.0
    for cs, ns in ((ca, na), (cb, nb)):
        exp = ns * tot / (na + nb)
        stat += float(np.sum((cs - exp) ** 2 / exp))
    dof = ca.size - 1
    p = float(_chi2.sf(stat, dof))
    return EquivalenceResult(stat, dof, p, tv, len(keys), pooled)


@dataclass
class TokunagaEstimate:
    """Pooled empirical Tokunaga indices.

    ``t_hat[k-1]`` estimates the asymptotic index T_k as the ratio of the
    summed side-branch counts sum_{i>=2} N_{i,i+k} to the summed absorber
    branch counts sum_{i>=2} N_{i+k}, pooled over replicates and over the
    subindex pairs {i, i+k} with i >= 2 (count-weighted, which keeps the
    small-sample high orders from dominating the noise)."""

    generator: str
    n: int
    reps: int
    t_hat: np.ndarray
    side_totals: np.ndarray
    branch_totals: np.ndarray


def empirical_tokunaga(generator: str, n: int, reps: int, base_seed: int,
                       threads: int = 1, min_side_order: int = 2) -> TokunagaEstimate:
    """Empirical Tokunaga indices averaged over trees and subindex pairs."""
    if n < 2 or reps < 1:
        raise DomainError("need n >= 2 and reps >= 1")

    def one(r):
        tree = generate_tree(generator, n, substream(base_seed, r))
        analysis = treecore.assign_horton_strahler(tree)
        nij, _ = treecore.tokunaga_counts(tree, analysis)
        return nij, analysis.branch_counts

    results = _map_replicates(one, reps, threads)
    kmax = max(bc.size for _, bc in results)
    sum_nij = np.zeros((kmax, kmax))
    sum_nk = np.zeros(kmax)
    for nij, bc in results:
        m = bc.size
        sum_nij[:m, :m] += nij
        sum_nk[:m] += bc
    lags = kmax - min_side_order
    t_hat = np.full(max(lags, 0), np.nan)
    side = np.zeros_like(t_hat)
    branches = np.zeros_like(t_hat)
    for k in range(1, lags + 1):
        i = np.arange(min_side_order, kmax - k + 1)
        num = sum_nij[i - 1, i + k - 1].sum()
        den = sum_nk[i + k - 1].sum()
        side[k - 1] = num
        branches[k - 1] = den
        if den > 0:
            t_hat[k - 1] = num / den
    return TokunagaEstimate(generator, n, reps, t_hat, side, branches)


@dataclass
class HydroResult:
    """Mean L2 discrepancies between step-function cluster counts and the
    deterministic order dynamics on [0, horizon]."""

    n: int
    reps: int
    horizon: float
    l2_total: float
    l2_by_order: np.ndarray


def _l2_step_vs_closed_form(times, values, horizon):
    """Exact integral of (step - 2/(t+2))^2 over [0, horizon]."""
    cut = np.searchsorted(times, horizon)
    t = np.concatenate([times[:cut], [horizon]])
    v = values[: cut]
    a, b = t[:-1], t[1:]
    # int (c - 2/(t+2))^2 = c^2 dt - 4c ln(t+2)| + 4 (-1/(t+2))(-1)|
    term = (
        v**2 * (b - a)
        - 4.0 * v * (np.log(b + 2.0) - np.log(a + 2.0))
        + 4.0 * (1.0 / (a + 2.0) - 1.0 / (b + 2.0))
    )
    return float(np.sqrt(np.sum(term)))


def _l2_step_vs_dense(times, values, horizon, fn, points=5):
    """Gauss quadrature of (step - fn(t))^2 per step interval on [0, horizon]."""
    gx, gw = np.polynomial.legendre.leggauss(points)
    cut = np.searchsorted(times, horizon)
    t = np.concatenate([times[:cut], [horizon]])
    v = values[:cut]
    a, b = t[:-1], t[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * gx[None, :]
    resid = (v[:, None] - fn(nodes.ravel()).reshape(nodes.shape)) ** 2
    return float(np.sqrt(np.sum(half[:, None] * gw[None, :] * resid)))


def hydrodynamic_check(n: int, reps: int, base_seed: int, gsol,
                       horizon: float = 10.0, max_order: int = 3,
                       threads: int = 1) -> HydroResult:
    """Per-replicate L2[0, horizon] distances between the simulated relative
    cluster counts and the deterministic limits, averaged over replicates.

    The total count is compared against the closed form 2/(t+2) exactly
    (piecewise analytic integration); per-order counts are compared against
    the solved order dynamics from ``gsol``.
    """
    if gsol.t_max < horizon:
        raise DomainError("g-solution horizon is shorter than the check horizon")
    if max_order > gsol.max_order:
        raise DomainError("g-solution solves fewer orders than requested")

    def one(r):
        path = order_count_trajectories(simulate_kingman(n, substream(base_seed, r)))
        tot = _l2_step_vs_closed_form(path.times, path.eta_total, horizon)
        per = np.empty(max_order)
        for j in range(1, max_order + 1):
            vals = path.eta[:, j - 1] if j <= path.max_order else np.zeros(path.times.size)
            per[j - 1] = _l2_step_vs_dense(
                path.times, vals, horizon, lambda ts, j=j: gsol.eta_at(j, ts)
            )
        return tot, per

    results = _map_replicates(one, reps, threads)
    tot = float(np.mean([t for t, _ in results]))
    per = np.mean(np.vstack([p for _, p in results]), axis=0)
    return HydroResult(n, reps, horizon, tot, per)
