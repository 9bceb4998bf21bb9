"""Posterior learning by minimising the empirical omega-margin C-bound.

The omega-margin is affine in the posterior: ``margins = (A - 1/omega) rho``
on the simplex, with ``A[i, j] = 1`` when voter ``j`` is right on example
``i``.  Fixing the first moment ``mu1(rho) = mu`` leaves the convex quadratic
``mu2(rho)`` to minimise over a slice of the simplex; the C-bound at ``mu`` is
then ``1 - mu^2 / min mu2``.  A grid over ``mu`` (optionally refined by
golden-section search) picks the best slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import MULTICLASS, Posterior, prediction_matrix
from .errors import BoundUndefined, ConfigError

ARMIJO = 1e-4
MIN_STEP = 2.0**-50
_BISECTION_STEPS = 200
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MinimizeConfig:
    omega: float = 2.0
    mu_grid: Optional[Sequence[float]] = None
    grid_size: int = 20
    mu_min: float = 1e-3
    max_iterations: int = 10000
    tolerance: float = 1e-8
    refine: bool = True
    refine_steps: int = 40
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.omega >= 1:
            raise ConfigError(f"omega must be >= 1, got {self.omega!r}")
        if self.grid_size < 1 or self.max_iterations < 1:
            raise ConfigError("grid size and iteration cap must be positive")
        if not self.tolerance > 0 or not self.mu_min > 0:
            raise ConfigError("tolerance and mu_min must be positive")
        if self.mu_grid is not None:
            ceiling = 1.0 - 1.0 / self.omega
            for mu in self.mu_grid:
                if not 0 < mu <= ceiling:
                    raise ConfigError(f"grid value {mu!r} must lie in (0, {ceiling!r}]")


@dataclass
class GridPoint:
    mu: float
    feasible: bool
    bound: Optional[float] = None
    mu1: Optional[float] = None
    mu2: Optional[float] = None
    iterations: int = 0
    converged: bool = False
    objective_trace: List[float] = field(default_factory=list, repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def monotone(self):
        trace = self.objective_trace
        return all(b <= a for a, b in zip(trace, trace[1:]))


@dataclass
class MinimizeResult:
    posterior: Posterior
    mu: float
    mu1: float
    mu2: float
    bound: float
    iterations: int
    converged: bool
    grid: List[GridPoint] = field(default_factory=list, repr=False)

    @property
    def skipped(self):
        return [p.mu for p in self.grid if not p.feasible]


def margin_operator(dataset, voters, omega):
    """``(A, b)`` with ``A[i, j] = I(h_j(x_i) = y_i)`` and ``b = -1/omega``,
    so the omega-margins are ``A @ rho + b``."""
    if dataset.kind != MULTICLASS:
        raise ConfigError("the omega-margin operator needs a multiclass dataset")
    if not omega >= 1:
        raise ConfigError(f"omega must be >= 1, got {omega!r}")
    voters = list(voters)
    if not voters:
        raise ConfigError("need at least one voter")
    preds = prediction_matrix(dataset, voters)
    if preds.shape != (dataset.n_examples, len(voters)):
        raise ConfigError(f"prediction matrix has shape {preds.shape}")
    a = (preds == dataset.targets[:, None]).astype(float)
    b = np.full(dataset.n_examples, -1.0 / omega)
    return a, b


class _Quadratic:
    """``mu1(rho) = c . rho`` and ``mu2(rho) = rho' H rho`` on the simplex."""

    def __init__(self, dataset, a, b):
        self.w = dataset.weights
        self.shifted = a + b[:, None]
        self.c = self.shifted.T @ self.w
        self.h = self.shifted.T @ (self.w[:, None] * self.shifted)

    def mu1(self, rho):
        return math.fsum(self.w * (self.shifted @ rho))

    def mu2(self, rho):
        margins = self.shifted @ rho
        return math.fsum(self.w * margins * margins)

    def objective(self, rho):
        return float(rho @ self.h @ rho)


def project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _kkt_polish(z, c, mu, support):
    """Exact projection for a known support: solve the two multiplier equations
    and accept the result only if it satisfies the KKT conditions."""
    zs, cs = z[support], c[support]
    system = np.array([[zs.size, cs.sum()], [cs.sum(), cs @ cs]])
    rhs = np.array([zs.sum() - 1.0, zs @ cs - mu])
    if abs(np.linalg.det(system)) <= 1e-12 * max(1.0, abs(system).max()) ** 2:
        return None
    lam, nu = np.linalg.solve(system, rhs)
    free = z - lam - nu * c
    if (free[support] < 0).any() or (free[~support] > 1e-14).any():
        return None
    rho = np.where(support, free, 0.0)
    return rho


def project_slice(z, c, mu, tol=1e-13):
    """Euclidean projection of ``z`` onto ``{rho in simplex : c . rho = mu}``.

    The multiplier ``nu`` of the linear constraint is found by bisection: the
    simplex projection of ``z - nu c`` has ``c . rho`` nonincreasing in ``nu``.
    Once the support is identified the multipliers are solved for exactly.
    """
    z = np.asarray(z, dtype=float)
    c = np.asarray(c, dtype=float)
    if c.max() - c.min() <= 1e-15:
        return project_simplex(z)

    def level(nu):
        rho = project_simplex(z - nu * c)
        return rho, float(c @ rho)

    lo = hi = 0.0
    rho, value = level(0.0)
    step = 1.0
    if value > mu:
        while value > mu and step < 1e300:
            lo, hi, step = hi, hi + step, step * 2
            rho, value = level(hi)
    else:
        while value < mu and step < 1e300:
            hi, lo, step = lo, lo - step, step * 2
            rho, value = level(lo)
    best, best_gap = rho, abs(value - mu)
    for _ in range(_BISECTION_STEPS):
        if best_gap <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        rho, value = level(mid)
        if abs(value - mu) < best_gap:
            best, best_gap = rho, abs(value - mu)
        polished = _kkt_polish(z, c, mu, rho > 0)
        if polished is not None:
            return polished
        if value > mu:
            lo = mid
        else:
            hi = mid
    return best


def _solve_slice(quad, mu, config):
    """Projected gradient descent with backtracking on one first-moment slice."""
    n = quad.c.size
    x = project_slice(np.full(n, 1.0 / n), quad.c, mu)
    fx = quad.objective(x)
    trace = [fx]
    converged = False
    iterations = 0
    while iterations < config.max_iterations:
        grad = 2.0 * (quad.h @ x)
        step = 1.0
        while step >= MIN_STEP:
            candidate = project_slice(x - step * grad, quad.c, mu)
            fc = quad.objective(candidate)
            if fc <= fx + ARMIJO * float(grad @ (candidate - x)) and fc <= fx:
                break
            step *= 0.5
        else:
            converged = True
            break
        iterations += 1
        decrease = fx - fc
        x, fx = candidate, fc
        trace.append(fx)
        if decrease < config.tolerance:
            converged = True
            break
    return x, iterations, converged, trace


def _evaluate(quad, mu, config):
    feasible = quad.c.min() <= mu <= quad.c.max()
    point = GridPoint(mu=float(mu), feasible=bool(feasible))
    if not feasible:
        return point
    x, iterations, converged, trace = _solve_slice(quad, mu, config)
    x = x / math.fsum(x)
    mu1, mu2 = quad.mu1(x), quad.mu2(x)
    point.weights = x
    point.iterations, point.converged, point.objective_trace = iterations, converged, trace
    point.mu1, point.mu2 = mu1, mu2
    if mu1 > 0 and mu2 > 0:
        point.bound = max(0.0, 1.0 - mu1 * mu1 / mu2)
    return point


def default_grid(quad, config):
    top = float(quad.c.max())
    if config.mu_grid is not None:
        grid = [float(mu) for mu in config.mu_grid]
    elif top <= config.mu_min:
        grid = [top]
    else:
        grid = list(np.geomspace(config.mu_min, top, config.grid_size))
    n = quad.c.size
    uniform_mu = quad.mu1(np.full(n, 1.0 / n))
    if uniform_mu > 0:
        grid.append(uniform_mu)
    return sorted(set(grid))


def _best(points):
    scored = [p for p in points if p.bound is not None]
    return min(scored, key=lambda p: (p.bound, p.mu)) if scored else None


def _refine(quad, points, config):
    """Golden-section search on ``mu`` between the neighbours of the best grid point."""
    feasible = sorted((p for p in points if p.bound is not None), key=lambda p: p.mu)
    best = _best(feasible)
    k = feasible.index(best)
    lo = feasible[k - 1].mu if k > 0 else best.mu
    hi = feasible[k + 1].mu if k + 1 < len(feasible) else min(float(quad.c.max()), 1.0 - 1.0 / config.omega)
    extra = []

    def score(mu):
        point = _evaluate(quad, mu, config)
        extra.append(point)
        return point.bound if point.bound is not None else math.inf

    a, b = lo, hi
    x1, x2 = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    f1, f2 = score(x1), score(x2)
    for _ in range(config.refine_steps):
        if b - a <= 1e-12:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = score(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = score(x2)
    return extra


def minimize(dataset, voters, config=None):
    """Posterior minimising the empirical omega-margin C-bound.

    Raises BoundUndefined when no posterior has a positive first moment.
    """
    config = config or MinimizeConfig()
    a, b = margin_operator(dataset, voters, config.omega)
    quad = _Quadratic(dataset, a, b)
    if not quad.c.max() > 0:
        raise BoundUndefined(
            f"every posterior has a nonpositive first omega-margin moment (best vertex {quad.c.max()!r})",
            variant="theorem6",
        )
    points = [_evaluate(quad, mu, config) for mu in default_grid(quad, config)]
    if _best(points) is None:
        raise BoundUndefined("no grid value yields a positive first moment", variant="theorem6")
    if config.refine and len(quad.c) > 1:
        points.extend(_refine(quad, points, config))
    best = _best(points)
    return MinimizeResult(
        posterior=Posterior(best.weights),
        mu=best.mu,
        mu1=best.mu1,
        mu2=best.mu2,
        bound=best.bound,
        iterations=best.iterations,
        converged=best.converged,
        grid=points,
    )
