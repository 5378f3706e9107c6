"""Minimize the tiled hemisphere area over the cut latitudes.

The solver seeds on a 1 degree lattice, runs cyclic coordinate descent with a
golden-section line search per cut, and finishes with Newton steps on the
tridiagonal Hessian.  A result is ``converged`` when every central-difference
partial derivative of the area is below ``grad_tol`` and the cuts sit strictly
inside the feasible region.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .scheme import AreaReport, InvalidSchemeError, PoleStyle, TileScheme, _hemisphere, hemisphere_area

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2
FD_STEP = 1e-6


@dataclass(frozen=True)
class OptimizationResult:
    scheme: TileScheme
    area: AreaReport
    iterations: int
    converged: bool
    max_gradient: float

    @property
    def n_tiles(self) -> int:
        return self.scheme.n_tiles

    @property
    def cuts_deg(self) -> tuple[float, ...]:
        return tuple(round(c, 2) for c in self.scheme.cuts_deg)


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-9, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x), iterations)``."""
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol and it < max_iter:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        it += 1
    x = 0.5 * (a + b)
    return x, f(x), it


def feasible_sigma_bound(n: int) -> float:
    return 1.0 / (n + 1)


def check_feasible(n: int, sigma: float) -> None:
    if n < 1:
        raise InvalidSchemeError(f"need at least one cut per hemisphere, got n={n}")
    if not 0 <= sigma < feasible_sigma_bound(n):
        raise InvalidSchemeError(
            f"overlap fraction {sigma} infeasible for {n} cuts: require 0 <= sigma < 1/(n+1) = {feasible_sigma_bound(n):.6g}"
        )


def gradient(cuts, k: float, sigma: float) -> np.ndarray:
    """Analytic partial derivatives of the hemisphere area."""
    th = np.asarray(cuts, dtype=float)
    n = len(th)
    span = sigma * math.pi
    prev_cos = np.concatenate(([1.0], np.cos(th[:-1])))
    g = 2 * math.pi * prev_cos
    if n > 1:
        inner = th[:-1]
        g[:-1] -= 2 * math.pi * (np.cos(inner) + np.sin(inner) * (th[1:] - inner + span))
    g[-1] -= 2 * k * (math.pi / 2 - th[-1] + span / 2)
    return g


def hessian(cuts, k: float, sigma: float) -> np.ndarray:
    th = np.asarray(cuts, dtype=float)
    n = len(th)
    span = sigma * math.pi
    h = np.zeros((n, n))
    for i in range(n - 1):
        s, c = math.sin(th[i]), math.cos(th[i])
        h[i, i] = 2 * math.pi * (2 * s - c * (th[i + 1] - th[i] + span))
        h[i, i + 1] = h[i + 1, i] = -2 * math.pi * s
    h[-1, -1] = 2 * k
    return h


def fd_gradient(cuts, pole=PoleStyle.SQUARE, sigma: float = 0.0, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of the hemisphere area."""
    k = PoleStyle.parse(pole).coefficient
    th = list(cuts)
    out = np.empty(len(th))
    for i in range(len(th)):
        up = th.copy()
        dn = th.copy()
        up[i] += step
        dn[i] -= step
        out[i] = (_hemisphere(up, k, sigma) - _hemisphere(dn, k, sigma)) / (2 * step)
    return out


def _bounds(sigma: float) -> tuple[float, float]:
    ext = sigma * math.pi / 2
    return ext, math.pi / 2 - ext


def lattice_seed(n: int, k: float, sigma: float) -> list[float]:
    """Best ordered tuple on the 1 degree lattice.

    Exhaustive for up to two cuts; beyond that the lattice is searched only
    around an arcsine-spaced starting tuple, one coordinate at a time.
    """
    lo, hi = _bounds(sigma)
    grid = [math.radians(d) for d in range(1, 90) if lo < math.radians(d) < hi]
    if len(grid) < n:
        # lattice too coarse to hold n distinct cuts
        return [lo + (hi - lo) * (i + 1) / (n + 1) for i in range(n)]
    if n <= 2:
        best = min(itertools.combinations(grid, n), key=lambda t: _hemisphere(t, k, sigma))
        return list(best)
    idx = sorted({min(len(grid) - 1, int(round(math.asin((i + 1) / (n + 1)) / (math.pi / 2) * (len(grid) - 1))))
                  for i in range(n)})
    while len(idx) < n:
        # collisions after rounding; fill with free lattice slots
        idx = sorted(set(idx) | {next(j for j in range(len(grid)) if j not in idx)})
    improved = True
    while improved:
        improved = False
        for i in range(n):
            a = idx[i - 1] + 1 if i > 0 else 0
            b = idx[i + 1] - 1 if i < n - 1 else len(grid) - 1
            cur = _hemisphere([grid[j] for j in idx], k, sigma)
            for j in range(a, b + 1):
                trial = idx.copy()
                trial[i] = j
                val = _hemisphere([grid[m] for m in trial], k, sigma)
                if val < cur - 1e-15:
                    cur, idx, improved = val, trial, True
    return [grid[j] for j in idx]


def _local_area(th: list[float], i: int, k: float, sigma: float) -> Callable[[float], float]:
    """Terms of the hemisphere area that depend on cut ``i``."""
    n = len(th)
    ext = sigma * math.pi / 2
    prev = th[i - 1] if i > 0 else None
    c_prev = math.cos(prev) if prev is not None else 1.0
    nxt = th[i + 1] if i < n - 1 else None

    def f(x: float) -> float:
        val = 2 * math.pi * c_prev * (x - (prev if prev is not None else 0.0))
        if nxt is None:
            rho = math.pi / 2 - x + ext
            val += k * rho * rho
        else:
            val += 2 * math.pi * math.cos(x) * (nxt - x + 2 * ext)
        return val

    return f


def _partial(th: list[float], i: int, x: float, k: float, sigma: float) -> tuple[float, float]:
    """First and second derivative of the area along cut ``i`` at ``x``."""
    span = sigma * math.pi
    c_prev = math.cos(th[i - 1]) if i > 0 else 1.0
    if i == len(th) - 1:
        return 2 * math.pi * c_prev - 2 * k * (math.pi / 2 - x + span / 2), 2 * k
    d = th[i + 1] - x + span
    s, c = math.sin(x), math.cos(x)
    return 2 * math.pi * (c_prev - c - s * d), 2 * math.pi * (2 * s - c * d)


def _line_search(th: list[float], i: int, k: float, sigma: float, lo: float, hi: float) -> float:
    a = th[i - 1] if i > 0 else lo
    b = th[i + 1] if i < len(th) - 1 else hi
    pad = 1e-12 * max(1.0, b - a)
    a, b = a + pad, b - pad
    x, _, _ = golden_section(_local_area(th, i, k, sigma), a, b, tol=1e-7)
    # golden section stalls near sqrt(eps); finish on the derivative
    for _ in range(8):
        g, h = _partial(th, i, x, k, sigma)
        if h <= 0:
            break
        step = g / h
        if not a < x - step < b:
            break
        x -= step
        if abs(step) < 1e-15:
            break
    return x


def _newton_polish(th: list[float], k: float, sigma: float, lo: float, hi: float, max_iter: int = 50):
    x = np.array(th)
    it = 0
    for it in range(1, max_iter + 1):
        g = gradient(x, k, sigma)
        try:
            step = np.linalg.solve(hessian(x, k, sigma), g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        base = _hemisphere(x, k, sigma)
        while t > 1e-6:
            cand = x - t * step
            bounded = np.concatenate(([lo], cand, [hi]))
            if np.all(np.diff(bounded) > 0) and _hemisphere(cand, k, sigma) <= base + 1e-13:
                break
            t *= 0.5
        else:
            break
        x = cand
        if np.max(np.abs(t * step)) < 1e-14:
            break
    return x.tolist(), it


def optimize_cuts(n: int, pole=PoleStyle.SQUARE, sigma: float = 0.0, *, tol: float = 1e-10,
                  max_sweeps: int = 60, grad_tol: float = 1e-8) -> OptimizationResult:
    """Optimal ``n`` cut latitudes for a pole style and overlap fraction."""
    pole = PoleStyle.parse(pole)
    sigma = float(sigma)
    check_feasible(n, sigma)
    k = pole.coefficient
    lo, hi = _bounds(sigma)

    th = lattice_seed(n, k, sigma)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        moved = 0.0
        for i in range(n):
            x = _line_search(th, i, k, sigma, lo, hi)
            moved = max(moved, abs(x - th[i]))
            th[i] = x
        if moved < tol:
            break
    th, newton_steps = _newton_polish(th, k, sigma, lo, hi)

    fd = fd_gradient(th, pole, sigma)
    max_grad = float(np.max(np.abs(fd)))
    interior = all(b > a for a, b in zip([lo] + th, th + [hi]))
    converged = interior and max_grad < grad_tol
    if not converged:
        logger.info("optimize_cuts(n=%d, sigma=%g) did not converge: max |dS| = %.3g", n, sigma, max_grad)
    scheme = TileScheme(tuple(th), pole, sigma)
    return OptimizationResult(scheme, hemisphere_area(scheme), sweeps + newton_steps, converged, max_grad)


def best_tilecount(sigma: float = 0.0, pole=PoleStyle.SQUARE, n_max: int = 25) -> OptimizationResult:
    """Cut count in ``1..n_max`` with the smallest optimal area; ties go to fewer cuts.

    Cut counts without an interior optimum (the cuts collapse onto each other
    once overlap dominates) are skipped unless nothing converges.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    results = [optimize_cuts(n, pole, sigma) for n in range(1, n_max + 1)]
    candidates = [r for r in results if r.converged] or results
    best = candidates[0]
    for res in candidates[1:]:
        if res.area.total_area < best.area.total_area:
            best = res
    return best
