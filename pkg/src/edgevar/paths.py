"""Path simulation on a refined grid, plus first/second Malliavin derivatives.

A path is simulated on the fine grid {k / (n K) : k = 0..nK} covering [0, 1]:
the state X advances by the Milstein scheme, the first-variation process Y
(derivative of the flow in its start value, Y_0 = 1) by the Euler scheme of
its linear equation dY = b2'(X) Y dt + b1'(X) Y dW.  One extra observation
block on (1, 1 + 1/n] is simulated from the same stream so that lag-one
statistics at the terminal observation are available; only the terminal
state of that block is retained.

Brownian increments come from per-path counter-based streams (Philox keyed by
a 64-bit seed) through the inverse normal CDF, so the numbers a path sees are
independent of the discretization scheme.

The first Malliavin derivative D_s X_t solves a linear equation whose solution
is the first-variation ratio  D_s X_t = Y_t Y_s^{-1} b1(X_s)  for s <= t, and
0 for s > t.  The diagonal second derivative D_s D_s X_t solves another linear
equation (initial value b1'(X_s) b1(X_s), sources b2''(X)(D_sX)^2 dt and
b1''(X)(D_sX)^2 dW) which is integrated by Euler steps along the stored path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, DegenerateVariationError, SimulationDivergedError
from .models import DiffusionModel

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    z &= _MASK64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """64-bit splittable per-replication seed: element ``index`` of the
    splitmix sequence started at ``master``."""
    return splitmix64((master + (index + 1) * _GOLDEN) & _MASK64)


def gaussian_increments(seed: int, count: int, scale: float) -> np.ndarray:
    """``count`` N(0, scale^2) increments from the Philox stream keyed by seed."""
    gen = np.random.Generator(np.random.Philox(key=seed & _MASK64))
    u = gen.random(count)
    return ndtri(u) * scale


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SimulatedPath:
    """Fine-grid trajectory of (W, X, Y) with an observation-grid view.

    Arrays have shape (..., n*K + 1); a leading batch dimension holds
    independent paths.  ``x_after`` is the state at time 1 + 1/n (end of the
    extra observation block), shape (...).
    """

    fine_dt: float
    w: np.ndarray
    x: np.ndarray
    y: np.ndarray
    obs_n: int
    refine: int
    x_after: np.ndarray
    seed: np.ndarray

    @property
    def obs_dt(self) -> float:
        return 1.0 / self.obs_n

    @property
    def n_fine(self) -> int:
        return self.obs_n * self.refine

    def obs_view(self, arr: np.ndarray) -> np.ndarray:
        return arr[..., :: self.refine]

    @property
    def obs_x(self) -> np.ndarray:
        return self.obs_view(self.x)

    @property
    def obs_w(self) -> np.ndarray:
        return self.obs_view(self.w)

    def fine_times(self) -> np.ndarray:
        return np.arange(self.n_fine + 1) * self.fine_dt

    def __getitem__(self, i) -> "SimulatedPath":
        """Select paths from a batch (no copy)."""
        return SimulatedPath(
            fine_dt=self.fine_dt, w=self.w[i], x=self.x[i], y=self.y[i],
            obs_n=self.obs_n, refine=self.refine,
            x_after=self.x_after[i], seed=self.seed[i],
        )


def _check_grid_args(n: int, refine: int) -> None:
    if n < 2 or not is_power_of_two(n):
        raise ConfigError(f"observation count n={n} must be a power of two >= 2")
    if refine < 1:
        raise ConfigError(f"refinement factor must be >= 1, got {refine}")


def _simulate_core(model: DiffusionModel, n: int, refine: int, dw: np.ndarray):
    """Advance (X, Y) over nK + K fine steps given increments dw (..., nK+K).

    Returns (w, x, y, x_after); the stored arrays cover [0, 1] only.
    All coefficients are evaluated at the left endpoint of each fine step.
    """
    total = n * refine
    dt = 1.0 / total
    lead = dw.shape[:-1]
    x = np.empty(lead + (total + 1,))
    y = np.empty(lead + (total + 1,))
    xk = np.full(lead, float(model.x0))
    yk = np.ones(lead)
    x[..., 0] = xk
    y[..., 0] = yk
    x_after = xk
    b1, b2, d1_b1, d1_b2 = model.b1, model.b2, model.d1_b1, model.d1_b2
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(total + refine):
            dwk = dw[..., k]
            b1v = b1(xk)
            d1v = d1_b1(xk)
            yk = yk * (1.0 + d1_b2(xk) * dt + d1v * dwk)
            xk = xk + b1v * dwk + b2(xk) * dt + 0.5 * b1v * d1v * (dwk * dwk - dt)
            if k < total:
                x[..., k + 1] = xk
                y[..., k + 1] = yk
            elif k == total + refine - 1:
                x_after = xk
    w = np.zeros(lead + (total + 1,))
    np.cumsum(dw[..., :total], axis=-1, out=w[..., 1:])
    return w, x, y, x_after


def simulate_path(model: DiffusionModel, n: int, refine: int, seed: int) -> SimulatedPath:
    """Simulate a single path; raises SimulationDivergedError on blow-up."""
    _check_grid_args(n, refine)
    dt = 1.0 / (n * refine)
    dw = gaussian_increments(seed, n * refine + refine, np.sqrt(dt))
    w, x, y, x_after = _simulate_core(model, n, refine, dw)
    bad = ~np.isfinite(x)
    if bad.any() or not np.isfinite(x_after):
        idx = int(np.argmax(bad)) if bad.any() else n * refine
        raise SimulationDivergedError(idx)
    model.check_states(x)
    return SimulatedPath(
        fine_dt=dt, w=w, x=x, y=y, obs_n=n, refine=refine,
        x_after=np.asarray(x_after), seed=np.asarray(seed, dtype=np.uint64),
    )


def simulate_batch(model: DiffusionModel, n: int, refine: int, seeds) -> tuple[SimulatedPath, np.ndarray]:
    """Simulate one path per seed; returns (batch, ok) where ok flags paths
    that stayed finite, inside the evaluation domain and above the |b1| bound.

    Rows with ok == False contain whatever the scheme produced and must not
    be used; callers account for them instead of aborting.
    """
    _check_grid_args(n, refine)
    seeds = np.asarray(seeds, dtype=np.uint64)
    dt = 1.0 / (n * refine)
    count = n * refine + refine
    dw = np.empty((seeds.size, count))
    for i, s in enumerate(seeds):
        dw[i] = gaussian_increments(int(s), count, np.sqrt(dt))
    w, x, y, x_after = _simulate_core(model, n, refine, dw)
    ok = model.states_ok(x) & np.isfinite(x_after)
    batch = SimulatedPath(
        fine_dt=dt, w=w, x=x, y=y, obs_n=n, refine=refine,
        x_after=np.asarray(x_after), seed=seeds,
    )
    return batch, ok


# -- Malliavin derivatives ----------------------------------------------------

def malliavin_derivative(path: SimulatedPath, model: DiffusionModel,
                         s: int, t: int) -> float:
    """D_s X_t at fine indices s <= t via the first-variation ratio; 0 if s > t."""
    if s > t:
        return 0.0
    ys = path.y[..., s]
    if np.any(ys == 0.0):
        raise DegenerateVariationError(f"first variation vanished at fine index {s}")
    return path.y[..., t] / ys * model.b1(path.x[..., s])


def second_malliavin_diag(path: SimulatedPath, model: DiffusionModel,
                          s: int, t: int) -> float:
    """Diagonal second derivative D_s D_s X_t at fine indices s <= t.

    Euler integration of the linear equation along the stored increments:
        dG = [b2''(X)(D_sX)^2 + b2'(X) G] du + [b1''(X)(D_sX)^2 + b1'(X) G] dW,
    started at G_s = b1'(X_s) b1(X_s).  Single-path only (1-D arrays).
    """
    if s > t:
        return 0.0
    if path.x.ndim != 1:
        raise ConfigError("second_malliavin_diag expects a single path")
    ys = float(path.y[s])
    if ys == 0.0:
        raise DegenerateVariationError(f"first variation vanished at fine index {s}")
    dt = path.fine_dt
    b1s = float(model.b1(path.x[s : s + 1])[0])
    g = float(model.d1_b1(path.x[s : s + 1])[0]) * b1s
    if s == t:
        return g
    xs = path.x[s:t]
    ysu = path.y[s:t]
    dw = np.diff(path.w[s : t + 1])
    dsx = ysu / ys * b1s
    d1b1 = model.d1_b1(xs)
    d2b1 = model.d2_b1(xs)
    d1b2 = model.d1_b2(xs)
    d2b2 = model.d2_b2(xs)
    for k in range(t - s):
        src2 = dsx[k] * dsx[k]
        g = g + (d2b2[k] * src2 + d1b2[k] * g) * dt + (d2b1[k] * src2 + d1b1[k] * g) * dw[k]
    return g
