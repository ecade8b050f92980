"""Smoluchowski-Horton ODE systems and asymptotic branching ratios.

Two equivalent systems are solved:

* the half-line system  g'_{j+1} = g_j^2/2 - g_j g_{j+1}  on [0, t_max] with
  g_1(t) = 2/(t+2) and g_j(0) = 0 for j >= 2, where g_j(t) is the limiting
  relative number of clusters of order >= j at time t;

* its rescaling to the unit interval,  h'_{k+1} = 2 h_k h_{k+1} - h_k^2
  with h_k(0) = 1 and h_1 == 1, obtained through
  h_k(x) = (1-x)^{-1} - (1-x)^{-2} g_{k+1}(2x/(1-x)).

Each h_k is an entire function (the system is polynomial and lower
triangular), but as k grows h_k hugs the singular envelope h(x) = 1/(1-x)
up to a narrow boundary layer of width ~ h_k(1)^{-1} near x = 1, so both
the integration and the quadrature use a grid geometrically refined toward
x = 1.  Asymptotic order-k branch fractions come from

    N_k = integral_0^1 (1 - (1-x) h_{k-1}(x))^2 dx,

evaluated by composite Gauss panels on [0, 1-eps] plus an endpoint-exact
trapezoid tail over [1-eps, 1] (the integrand equals 1 at x = 1 exactly);
the rigorous tail bound eps is reported separately.  Tokunaga indices and
the interval identities used as solver invariants are integrals of the same
family.  A quadrature form of the exact integrating-factor solution serves
as an independent oracle for the stepped solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .coalescent import Kernel
from .errors import DomainError, SolverError

__all__ = [
    "SolverConfig",
    "HortonSolution",
    "GSolution",
    "MassOrderState",
    "GeneralSolution",
    "solve_h_system",
    "solve_g_system",
    "iterate_functional",
    "horton_ratios",
    "tokunaga_matrix",
    "gamma_sequence",
    "estimate_R",
    "invariant_report",
    "solve_general_smoluchowski_horton",
    "h_from_g",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


@dataclass
class SolverConfig:
    """Grid and tolerance settings for the unit-interval solver.

    ``max_order`` is the number of h functions (h_1..h_K); ``eps`` cuts the
    quadrature domain at 1-eps; the grid refines geometrically toward 1 with
    ``points_per_decade`` nodes per decade, never stepping below
    ``delta_min``.
    """

    max_order: int = 12
    eps: float = 1e-8
    delta_min: float = 1e-12
    tol: float = 1e-12
    points_per_decade: int = 40
    coarse_step: float = 0.005

    def __post_init__(self):
        if self.max_order < 2:
            raise DomainError("max_order must be >= 2")
        if not (0.0 < self.eps <= 1e-6):
            raise DomainError("eps must lie in (0, 1e-6]")
        if self.delta_min < 1e-12:
            raise DomainError("delta_min must be >= 1e-12")
        if self.tol <= 0:
            raise DomainError("tol must be positive")

    def grid(self) -> np.ndarray:
        """Nodes on [0, 1-eps]: uniform coarse part, geometric refinement."""
        coarse = np.arange(0.0, 0.9 + 1e-15, self.coarse_step)
        decades = math.ceil(math.log10(0.1 / self.eps))
        geo = 1.0 - np.logspace(
            math.log10(0.1), math.log10(self.eps), decades * self.points_per_decade + 1
        )
        nodes = np.unique(np.concatenate([coarse, geo, [1.0 - self.eps]]))
        nodes = nodes[nodes <= 1.0 - self.eps + 1e-18]
        # honor the minimum step
        keep = np.ones(nodes.size, dtype=bool)
        last = nodes[0]
        for i in range(1, nodes.size - 1):
            if nodes[i] - last < self.delta_min:
                keep[i] = False
            else:
                last = nodes[i]
        return nodes[keep]


def _panel_quadrature(nodes):
    """Gauss-Legendre(5) abscissas/weights per panel of the node grid."""
    a, b = nodes[:-1], nodes[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    qx = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    qw = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return qx, qw


@dataclass
class HortonSolution:
    """Solved h-system with the quadrature cache on the refined grid.

    ``H[k-1]`` samples h_k on ``grid``; ``h_end[k-1]`` is h_k(1);
    ``h_cut[k-1]`` is h_k(1-eps).  ``tail_bound`` is the rigorous bound eps
    on every tail integral over [1-eps, 1].
    """

    config: SolverConfig
    grid: np.ndarray
    H: np.ndarray
    h_end: np.ndarray
    h_cut: np.ndarray
    quad_x: np.ndarray = field(repr=False)
    quad_w: np.ndarray = field(repr=False)
    H_quad: np.ndarray = field(repr=False)

    @property
    def max_order(self) -> int:
        return self.config.max_order

    @property
    def tail_bound(self) -> float:
        return self.config.eps

    def h_at(self, k: int, where: str = "quad") -> np.ndarray:
        """h_k sampled at the quadrature nodes ('quad') or grid nodes
        ('grid'); k = 0 gives the identically-zero h_0."""
        src = self.H_quad if where == "quad" else self.H
        if k == 0:
            return np.zeros(src.shape[1])
        if not (1 <= k <= self.max_order):
            raise DomainError(f"h_{k} was not solved (max order {self.max_order})")
        return src[k - 1]

    def integral(self, values_on_quad: np.ndarray) -> float:
        """Composite Gauss integral over [0, 1-eps]."""
        return float(np.dot(self.quad_w, values_on_quad))

    def horton_integrand(self, k: int, where: str = "quad") -> np.ndarray:
        x = self.quad_x if where == "quad" else self.grid
        return (1.0 - (1.0 - x) * self.h_at(k - 1, where)) ** 2

    def horton_integral(self, k: int) -> float:
        """N_k with the endpoint-exact tail over [1-eps, 1] added."""
        main = self.integral(self.horton_integrand(k))
        eps = self.config.eps
        h_at_cut = 0.0 if k == 1 else self.h_cut[k - 2]
        f_cut = (1.0 - eps * h_at_cut) ** 2
        return main + eps * 0.5 * (f_cut + 1.0)


def solve_h_system(config: SolverConfig | None = None) -> HortonSolution:
    """Integrate h'_{k+1} = 2 h_k h_{k+1} - h_k^2 for k = 1..K-1.

    The system is solved jointly (it is lower triangular, so this is the
    sequential quasilinear solve in vector form) with an adaptive 8th-order
    Runge-Kutta step and dense output; h_1 == 1 is analytic.  Raises
    :class:`SolverError` with the reached abscissa if the tolerance cannot
    be met.
    """
    cfg = config or SolverConfig()
    K = cfg.max_order

    def rhs(x, y):
        d = np.empty_like(y)
        d[0] = 2.0 * y[0] - 1.0
        d[1:] = 2.0 * y[:-1] * y[1:] - y[:-1] ** 2
        return d

    sol = solve_ivp(
        rhs,
        (0.0, 1.0),
        np.ones(K - 1),
        method="DOP853",
        rtol=cfg.tol,
        atol=cfg.tol * 0.1,
        dense_output=True,
    )
    if sol.status != 0:
        raise SolverError(
            f"h-system integration failed: {sol.message}", where=float(sol.t[-1])
        )
    grid = cfg.grid()
    qx, qw = _panel_quadrature(np.concatenate([grid, [1.0 - cfg.eps]])
                               if grid[-1] < 1.0 - cfg.eps else grid)
    ones_grid = np.ones_like(grid)
    ones_q = np.ones_like(qx)
    H = np.vstack([ones_grid, sol.sol(grid)])
    Hq = np.vstack([ones_q, sol.sol(qx)])
    h_end = np.concatenate([[1.0], sol.sol(1.0)])
    h_cut = np.concatenate([[1.0], sol.sol(1.0 - cfg.eps)])
    return HortonSolution(cfg, grid, H, h_end, h_cut, qx, qw, Hq)


def horton_ratios(sol: HortonSolution) -> np.ndarray:
    """Asymptotic branch fractions N_1..N_K from the solved h functions.

    N_1 integrates to exactly 1; the geometric decay rate of the sequence is
    the Horton exponent.  Tail integrals over [1-eps, 1] are added with the
    endpoint-exact correction; ``sol.tail_bound`` bounds their error."""
    return np.array([sol.horton_integral(k) for k in range(1, sol.max_order + 1)])


def tokunaga_matrix(sol: HortonSolution, max_order: int | None = None) -> np.ndarray:
    """Asymptotic Tokunaga index matrix T_ij for 1 <= i < j <= jmax.

    Entry [i-1, j-1] is
        2 * integral (1-x)^2 (h_i - h_{i+1})(h_j - h_{j+1}) dx
        / integral (1 - (1-x) h_j)^2 dx,
    the convention that reproduces the published index table (its stated
    (i-1, j-1) labeling is shifted by one).  Requires h up to order j+1;
    entries outside the strict upper triangle are zero.
    """
    K = sol.max_order
    jmax = K - 1 if max_order is None else max_order
    if jmax > K - 1:
        raise DomainError(f"Tokunaga index {jmax} needs h_{jmax + 1} beyond max order {K}")
    omx = 1.0 - sol.quad_x
    eps = sol.config.eps
    T = np.zeros((jmax, jmax))
    diffs = [None] + [sol.h_at(k + 1) - sol.h_at(k) for k in range(1, jmax + 1)]
    diffs_cut = [0.0] + [sol.h_cut[k] - sol.h_cut[k - 1] for k in range(1, jmax + 1)]
    for j in range(2, jmax + 1):
        den = sol.horton_integral(j + 1)
        for i in range(1, j):
            main = 2.0 * sol.integral(omx**2 * diffs[i] * diffs[j])
            g_cut = 2.0 * eps**2 * diffs_cut[i] * diffs_cut[j]
            num = main + eps * 0.5 * g_cut  # integrand vanishes at x = 1
            T[i - 1, j - 1] = num / den
    return T


def gamma_sequence(sol: HortonSolution):
    """Endpoint ratios gamma_k = h_k(1)/h_{k+1}(1), k = 1..K-1.

    The reciprocals 1/gamma_k decrease toward the Horton exponent; any
    monotonicity violation (never expected) is reported in the second
    return value."""
    h1 = sol.h_end
    gamma = h1[:-1] / h1[1:]
    bad = [int(k + 1) for k in range(gamma.size - 1) if gamma[k + 1] < gamma[k]]
    notes = [f"gamma_{k} > gamma_{k + 1}: monotonicity violated" for k in bad]
    return gamma, notes


@dataclass
class REstimate:
    r_root: float
    r_ratio: float
    difference: float


def estimate_R(ratios) -> REstimate:
    """Horton exponent estimates from a branch-fraction sequence.

    r_ratio is the last consecutive ratio N_{K-1}/N_K; r_root extrapolates
    the root law by fitting log N_k linearly in k over the top half of the
    sequence (for an exactly geometric input both coincide with the ratio).
    """
    N = np.asarray(ratios, dtype=np.float64)
    if N.size < 4:
        raise DomainError("need at least four values")
    if np.any(N <= 0):
        raise DomainError("branch fractions must be positive")
    r_ratio = float(N[-2] / N[-1])
    ks = np.arange(1, N.size + 1)
    lo = N.size // 2
    slope = np.polyfit(ks[lo:], np.log(N[lo:]), 1)[0]
    r_root = float(np.exp(-slope))
    return REstimate(r_root, r_ratio, abs(r_root - r_ratio))


def iterate_functional(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Quadrature form of the exact integrating-factor step.

    Given f >= 0 sampled on an increasing grid, returns
        (1 - int_0^x f^2 e^{-2F}) e^{2F},   F(x) = int_0^x f,
    computed with spline quadrature only -- independent of the ODE stepper,
    so it serves as an oracle for :func:`solve_h_system` (Hf applied to h_k
    reproduces h_{k+1}).  At x = 0 the value is exactly 1.  Raises
    :class:`SolverError` naming the largest usable abscissa if e^{2F}
    overflows.
    """
    x = np.asarray(x, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if x.ndim != 1 or x.shape != f.shape or x.size < 4:
        raise DomainError("need matching 1-d arrays with at least 4 points")
    if np.any(f < 0):
        raise DomainError("f must be nonnegative")
    F = CubicSpline(x, f).antiderivative()(x)
    if np.any(2.0 * F > 700.0):
        limit = x[np.searchsorted(2.0 * F, 700.0) - 1]
        raise SolverError(
            f"exp(2 int f) overflows; usable up to x = {limit!r}", where=float(limit)
        )
    inner = f * f * np.exp(-2.0 * F)
    A = CubicSpline(x, inner).antiderivative()(x)
    out = (1.0 - A) * np.exp(2.0 * F)
    out[0] = 1.0
    return out


def invariant_report(sol: HortonSolution) -> dict:
    """Analytic invariants of a solve, checked numerically.

    Returns a dict with the pointwise envelope margin
    (min over grid of h_{k+1} - h_k and of 1/(1-x) - h_k), the interval
    identity gaps |  ||1 - h_{k+1}/h||^2 - ||(h_{k+1}-h_k)/h||^2  |, the
    endpoint sandwich margins N_{k+2} <= 1/h_{k+1}(1) <= N_{k+1}, the
    consecutive-ratio range, and the gamma monotonicity notes.
    """
    K = sol.max_order
    x = sol.grid
    envelope = math.inf
    for k in range(1, K + 1):
        hk = sol.h_at(k, "grid")
        envelope = min(envelope, float(np.min(1.0 / (1.0 - x) - hk)))
        if k < K:
            envelope = min(envelope, float(np.min(sol.h_at(k + 1, "grid") - hk)))
    omx = 1.0 - sol.quad_x
    eps = sol.config.eps
    half_gaps = []
    for k in range(0, K):
        lhs = sol.horton_integral(k + 2)  # ||1 - h_{k+1}/h||^2, tail-corrected
        d = sol.h_at(k + 1) - sol.h_at(k)
        d_cut = sol.h_cut[k] - (sol.h_cut[k - 1] if k >= 1 else 0.0)
        rhs = sol.integral((omx * d) ** 2) + eps * 0.5 * (eps * d_cut) ** 2
        half_gaps.append(abs(lhs - rhs))
    N = horton_ratios(sol)
    # N_{k+2} <= 1/h_{k+1}(1) <= N_{k+1}: margins (v - lower, upper - v)
    sandwich = []
    for k in range(0, K - 1):
        v = 1.0 / sol.h_end[k]
        sandwich.append((v - N[k + 1], N[k] - v))
    nk = N[:-1] / N[1:]
    gamma, gamma_notes = gamma_sequence(sol)
    return {
        "envelope_margin": envelope,
        "half_identity_gaps": np.array(half_gaps),
        "sandwich_margins": sandwich,
        "n_k": nk,
        "n_k_range": (float(nk.min()), float(nk.max())),
        "gamma": gamma,
        "gamma_notes": gamma_notes,
    }


# -- half-line g system -------------------------------------------------------


@dataclass
class GSolution:
    """Solved g-system on [0, t_max] with a quadrature cache.

    ``G[j-1]`` samples g_j on ``t_grid`` (g_1 analytic); norms over the tail
    beyond t_max use the universal decay t g_j(t) -> 2, giving the estimate
    integral_{t_max}^inf g_j^2/2 ~= 2/t_max.
    """

    max_order: int
    t_max: float
    t_grid: np.ndarray
    G: np.ndarray
    quad_t: np.ndarray = field(repr=False)
    quad_w: np.ndarray = field(repr=False)
    G_quad: np.ndarray = field(repr=False)
    _dense: object = field(repr=False, default=None)

    def g_at(self, j: int, t) -> np.ndarray:
        """g_j evaluated at arbitrary times (dense output; g_1 closed form)."""
        t = np.asarray(t, dtype=np.float64)
        if j == 1:
            return 2.0 / (t + 2.0)
        if not (2 <= j <= self.max_order + 1):
            raise DomainError(f"g_{j} was not solved")
        return self._dense(t)[j - 2]

    def eta_at(self, j: int, t) -> np.ndarray:
        """Relative count of order-j clusters: eta_j = g_j - g_{j+1}."""
        return self.g_at(j, t) - self.g_at(j + 1, t)

    def norms(self) -> np.ndarray:
        """integral_0^inf g_j^2/2 dt for j = 1..max_order (tail ~ 2/t_max);
        these are the branch fractions N_j on the half-line side."""
        out = np.empty(self.max_order)
        for j in range(1, self.max_order + 1):
            gq = 2.0 / (self.quad_t + 2.0) if j == 1 else self.G_quad[j - 2]
            main = float(np.dot(self.quad_w, 0.5 * gq * gq))
            tail = 2.0 / (self.t_max + 2.0) if j == 1 else 2.0 / self.t_max
            out[j - 1] = main + tail
        return out


def solve_g_system(max_order: int, t_max: float = 1e4, tol: float = 1e-12) -> GSolution:
    """Integrate g'_{j+1} = g_j^2/2 - g_j g_{j+1} for j = 1..max_order.

    Solves g_2..g_{max_order+1} so that eta_j = g_j - g_{j+1} is available
    for every order j <= max_order.
    """
    if max_order < 1:
        raise DomainError("max_order must be >= 1")
    if t_max < 1e3:
        raise DomainError("t_max must be >= 1e3 for usable tail estimates")

    def rhs(t, y):
        g1 = 2.0 / (t + 2.0)
        full = np.concatenate([[g1], y])
        return 0.5 * full[:-1] ** 2 - full[:-1] * full[1:]

    sol = solve_ivp(
        rhs,
        (0.0, t_max),
        np.zeros(max_order),
        method="DOP853",
        rtol=tol,
        atol=1e-14,
        dense_output=True,
    )
    if sol.status != 0:
        raise SolverError(
            f"g-system integration failed: {sol.message}", where=float(sol.t[-1])
        )
    decades = math.ceil(math.log10(t_max / 1e-3))
    t_grid = np.unique(
        np.concatenate([[0.0], np.logspace(-3, math.log10(t_max), decades * 40 + 1)])
    )
    qt, qw = _panel_quadrature(t_grid)
    G = sol.sol(t_grid)
    Gq = sol.sol(qt)
    return GSolution(max_order, t_max, t_grid, G, qt, qw, Gq, sol.sol)


def h_from_g(gsol: GSolution, k: int, x) -> np.ndarray:
    """Change of variables h_k(x) = (1-x)^{-1} - (1-x)^{-2} g_{k+1}(2x/(1-x)).

    Valid while 2x/(1-x) <= t_max, i.e. x <= t_max/(t_max+2)."""
    x = np.asarray(x, dtype=np.float64)
    x_max = gsol.t_max / (gsol.t_max + 2.0)
    if np.any(x > x_max) or np.any(x < 0):
        raise DomainError(f"x must lie in [0, {x_max}] for this t_max")
    u = 2.0 * x / (1.0 - x)
    return 1.0 / (1.0 - x) - gsol.g_at(k + 1, u) / (1.0 - x) ** 2


# -- mass-and-order classified system ----------------------------------------


@dataclass
class MassOrderState:
    """Snapshot of the mass-and-order classified cluster densities.

    ``eta[j-1, k-1]`` holds the density of order-j mass-k clusters for
    j <= max_order; row ``max_order`` aggregates all higher orders (that
    overflow row is what keeps the tracked rows exact -- higher orders feed
    back only through the total mass spectrum in the loss term).  ``lost``
    is the mass routed to the absorbing over-mass sink by time t.
    """

    t: float
    eta: np.ndarray
    lost: float

    @property
    def order_counts(self) -> np.ndarray:
        return self.eta.sum(axis=1)

    @property
    def tracked_mass(self) -> float:
        k = np.arange(1, self.eta.shape[1] + 1)
        return float(self.eta.sum(axis=0) @ k)


@dataclass
class GeneralSolution:
    """History of the truncated mass-order system plus branch-count gains."""

    kernel_name: str
    max_order: int
    max_mass: int
    t_max: float
    states: list
    created: np.ndarray   # creations into orders 2..max_order over [0, t_max]
    warnings: list

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def order_counts(self) -> np.ndarray:
        """(n_times, max_order) tracked per-order totals sum_k eta_{j,k}."""
        return np.vstack([s.eta[: self.max_order].sum(axis=1) for s in self.states])

    @property
    def lost_mass(self) -> float:
        return float(self.states[-1].lost)

    def ratio_estimates(self) -> np.ndarray:
        """N_j estimates: creations of order-j clusters per initial particle
        (N_1 = 1 from the initial condition)."""
        return np.concatenate([[1.0], self.created])


def solve_general_smoluchowski_horton(
    kernel: Kernel,
    max_order: int,
    max_mass: int,
    t_max: float,
    tol: float = 1e-8,
    n_snapshots: int = 201,
    lost_warn_fraction: float = 1e-3,
) -> GeneralSolution:
    """Integrate the mass-and-order classified coagulation system.

    State rows are orders 1..max_order plus one overflow row aggregating all
    higher orders; masses run 1..max_mass and coagulation products heavier
    than that are routed to an absorbing sink whose mass is monitored (so
    tracked mass + lost mass is conserved exactly).  Gains: same-order
    coagulation promotes order j-1 pairs to order j; absorbing a strictly
    lower order keeps the absorber's order.  Losses: every collision removes
    both participants from their cells.  Order-creation gains are
    accumulated (including over-mass products) to estimate the branch
    fractions N_j.

    Lost mass beyond ``lost_warn_fraction`` of the total adds a warning;
    beyond 50% the solve fails.
    """
    if max_order < 1:
        raise DomainError("max_order must be >= 1")
    if max_mass < 2 ** max_order:
        raise DomainError("max_mass must be at least 2**max_order")
    J, M = max_order, max_mass
    R = J + 1  # + overflow row
    Kmat = kernel.matrix(M)
    pair_mass = (np.arange(M)[:, None] + np.arange(M)[None, :] + 2).ravel()
    nstate = R * M

    def rhs(t, y):
        eta = y[:nstate].reshape(R, M)
        d = np.zeros_like(eta)
        c = eta.sum(axis=0)
        colrate = Kmat @ c
        d -= eta * colrate[None, :]
        # mass flux into the over-mass sink, all orders
        w_all = 0.5 * np.outer(c, c) * Kmat
        prod = np.bincount(pair_mass, weights=w_all.ravel(), minlength=2 * M + 2)
        ks = np.arange(prod.size)
        lost_rate = float(prod[M + 1 :] @ ks[M + 1 :])
        created_rate = np.zeros(J - 1)
        lower = np.zeros(M)
        for j in range(1, R):
            w = 0.5 * np.outer(eta[j - 1], eta[j - 1]) * Kmat
            conv = np.bincount(pair_mass, weights=w.ravel(), minlength=M + 2)
            d[j, 1:] += conv[2 : M + 1]
            if 1 <= j <= J - 1:
                created_rate[j - 1] = float(w.sum())  # all products, sink included
            lower = lower + eta[j - 1]
            w2 = np.outer(eta[j], lower) * Kmat
            conv2 = np.bincount(pair_mass, weights=w2.ravel(), minlength=M + 2)
            d[j, 1:] += conv2[2 : M + 1]
        # overflow-overflow coagulation stays in the overflow row
        w3 = 0.5 * np.outer(eta[R - 1], eta[R - 1]) * Kmat
        conv3 = np.bincount(pair_mass, weights=w3.ravel(), minlength=M + 2)
        d[R - 1, 1:] += conv3[2 : M + 1]
        return np.concatenate([d.ravel(), [lost_rate], created_rate])

    y0 = np.zeros(nstate + 1 + (J - 1))
    y0[0] = 1.0  # eta_{1,1}
    t_eval = np.linspace(0.0, t_max, n_snapshots)
    sol = solve_ivp(rhs, (0.0, t_max), y0, method="RK45", rtol=tol, atol=1e-14,
                    t_eval=t_eval)
    if sol.status != 0:
        raise SolverError(
            f"mass-order integration failed: {sol.message}", where=float(sol.t[-1])
        )
    states = [
        MassOrderState(float(t), y[:nstate].reshape(R, M).copy(), float(y[nstate]))
        for t, y in zip(sol.t, sol.y.T)
    ]
    created = sol.y[nstate + 1 :, -1].copy()
    notes = []
    lost = states[-1].lost
    if lost > 0.5:
        raise SolverError(f"lost mass {lost:.3g} exceeds 50% of the system")
    if lost > lost_warn_fraction:
        msg = (
            f"lost mass {lost:.3e} exceeds the configured fraction "
            f"{lost_warn_fraction:.1e}; order counts carry that bias"
        )
        notes.append(msg)
        warnings.warn(msg, stacklevel=2)
    return GeneralSolution(kernel.name, J, M, t_max, states, created, notes)
