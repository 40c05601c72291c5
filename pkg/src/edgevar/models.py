"""Diffusion model definition: dX = b1(X) dW + b2(X) dt.

A model bundles the diffusion coefficient ``b1``, the drift ``b2``, their
derivatives (up to order 4 for b1 and order 2 for b2), the deterministic
start value ``x0``, and an evaluation domain on which ``|b1|`` is bounded
away from zero.  Everything downstream — path simulation, expansion terms,
random-symbol functionals — pulls coefficients from here.

The coefficient processes b1(X_t), b2(X_t) are themselves diffusions; their
local diffusion/drift coefficients are exposed as :class:`DerivedCoefficients`:

    b11  = b1' * b1                    (diffusion coefficient of b1(X_t))
    b12  = b1' * b2 + b1'' * b1^2 / 2  (drift of b1(X_t))
    b21  = b2' * b1                    (diffusion coefficient of b2(X_t))
    b111 = (b1'' * b1 + b1'^2) * b1    (diffusion coefficient of b11(X_t))
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateDiffusionError, DomainExitError
from .expressions import derivatives, parse_expression

Scalar = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DiffusionModel:
    name: str
    b1: Scalar
    b2: Scalar
    d1_b1: Scalar
    d2_b1: Scalar
    d3_b1: Scalar
    d4_b1: Scalar
    d1_b2: Scalar
    d2_b2: Scalar
    x0: float
    domain: tuple[float, float] | None = None
    b1_lower_bound: float | None = None
    # Records whether some derivative of b1 is nonzero at x0 (needed for the
    # nondegeneracy of the conditional-variance law); informational only.
    chaos_nondegenerate: bool = True

    def __post_init__(self):
        if not np.isfinite(self.x0):
            raise ConfigError("x0 must be finite")
        if self.domain is None:
            object.__setattr__(self, "domain", (self.x0 - 10.0, self.x0 + 10.0))
        lo, hi = self.domain
        if not lo < hi:
            raise ConfigError("domain must be a nondegenerate interval")
        if not (lo <= self.x0 <= hi):
            raise ConfigError("x0 must lie in the evaluation domain")
        if self.b1_lower_bound is None:
            object.__setattr__(self, "b1_lower_bound", self._scan_b1_infimum())
        if self.b1_lower_bound <= 0:
            raise DegenerateDiffusionError(
                f"inf |b1| over {self.domain} is not positive "
                f"(found {self.b1_lower_bound:.3g})"
            )

    def _scan_b1_infimum(self, points: int = 4001) -> float:
        lo, hi = self.domain
        grid = np.linspace(lo, hi, points)
        return float(np.min(np.abs(self.b1(grid))))

    # -- checked evaluation ------------------------------------------------

    def check_states(self, x: np.ndarray) -> None:
        """Assert states lie in the domain with |b1| at or above the declared bound.

        Raises DomainExitError / DegenerateDiffusionError on violation.
        """
        lo, hi = self.domain
        xmin, xmax = float(np.min(x)), float(np.max(x))
        if xmin < lo or xmax > hi:
            raise DomainExitError(
                f"state left evaluation domain [{lo:.4g}, {hi:.4g}]: "
                f"range [{xmin:.4g}, {xmax:.4g}]"
            )
        b1min = float(np.min(np.abs(self.b1(x))))
        # Small slack for roundoff against the scanned infimum.
        if b1min < self.b1_lower_bound * (1 - 1e-12):
            raise DegenerateDiffusionError(
                f"|b1| = {b1min:.4g} below declared bound {self.b1_lower_bound:.4g}"
            )

    def states_ok(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        """Per-path boolean validity mask (domain containment, |b1| bound)."""
        lo, hi = self.domain
        finite = np.all(np.isfinite(x), axis=axis)
        inside = np.all((x >= lo) & (x <= hi), axis=axis)
        # Only meaningful where finite; abs on NaN stays NaN and compares False.
        strong = np.all(np.abs(self.b1(np.where(np.isfinite(x), x, self.x0)))
                        >= self.b1_lower_bound * (1 - 1e-12), axis=axis)
        return finite & inside & strong

    def derived(self) -> "DerivedCoefficients":
        return DerivedCoefficients.from_model(self)


@dataclass(frozen=True)
class DerivedCoefficients:
    b11: Scalar
    b12: Scalar
    b21: Scalar
    b111: Scalar

    @classmethod
    def from_model(cls, m: DiffusionModel) -> "DerivedCoefficients":
        def b11(x):
            return m.d1_b1(x) * m.b1(x)

        def b12(x):
            return m.d1_b1(x) * m.b2(x) + 0.5 * m.d2_b1(x) * m.b1(x) ** 2

        def b21(x):
            return m.d1_b2(x) * m.b1(x)

        def b111(x):
            return (m.d2_b1(x) * m.b1(x) + m.d1_b1(x) ** 2) * m.b1(x)

        return cls(b11=b11, b12=b12, b21=b21, b111=b111)


def _const_fn(value: float) -> Scalar:
    def f(x):
        return np.full_like(np.asarray(x, dtype=float), value)

    return f


def model_from_callables(name, b1, b2, d1_b1, d2_b1, d3_b1, d4_b1, d1_b2, d2_b2,
                         x0, domain=None, b1_lower_bound=None,
                         chaos_nondegenerate=True) -> DiffusionModel:
    return DiffusionModel(
        name=name, b1=b1, b2=b2,
        d1_b1=d1_b1, d2_b1=d2_b1, d3_b1=d3_b1, d4_b1=d4_b1,
        d1_b2=d1_b2, d2_b2=d2_b2,
        x0=x0, domain=domain, b1_lower_bound=b1_lower_bound,
        chaos_nondegenerate=chaos_nondegenerate,
    )


def model_from_expressions(b1_expr: str, b2_expr: str, x0: float,
                           name: str = "custom", domain=None) -> DiffusionModel:
    """Build a model from coefficient expressions; derivatives are symbolic."""
    b1_tree = parse_expression(b1_expr)
    b2_tree = parse_expression(b2_expr)
    b1d = derivatives(b1_tree, 4)
    b2d = derivatives(b2_tree, 2)
    nondeg = _nonvanishing_derivative(b1d, x0)
    return model_from_callables(
        name, b1d[0], b2d[0], b1d[1], b1d[2], b1d[3], b1d[4], b2d[1], b2d[2],
        x0=x0, domain=domain, chaos_nondegenerate=nondeg,
    )


def _nonvanishing_derivative(b1_derivs: Sequence, x0: float) -> bool:
    point = np.asarray([x0])
    total = sum(abs(float(d(point)[0])) for d in b1_derivs[1:])
    return total > 0.0


# -- presets ----------------------------------------------------------------

def brownian_model(x0: float = 0.0) -> DiffusionModel:
    z = _const_fn(0.0)
    return model_from_callables(
        "bm", _const_fn(1.0), z, z, z, z, z, z, z,
        x0=x0, chaos_nondegenerate=False,
    )


def brownian_drift_model(x0: float = 0.0, drift: float = 1.0) -> DiffusionModel:
    z = _const_fn(0.0)
    return model_from_callables(
        "bm-drift", _const_fn(1.0), _const_fn(drift), z, z, z, z, z, z,
        x0=x0, chaos_nondegenerate=False,
    )


def tanh_vol_model(x0: float = 0.3) -> DiffusionModel:
    """Smooth bounded-volatility model: b1 = 1 + 0.25 tanh(x), b2 = -x/2."""
    return model_from_expressions(
        "1 + 0.25*tanh(x)", "-0.5*x", x0=x0, name="tanh-vol",
    )


def constant_vol_model(sigma: float, drift: float = 0.0, x0: float = 0.0) -> DiffusionModel:
    z = _const_fn(0.0)
    return model_from_callables(
        f"const-vol-{sigma:g}", _const_fn(sigma), _const_fn(drift),
        z, z, z, z, z, z, x0=x0, chaos_nondegenerate=False,
    )


PRESETS = {
    "bm": brownian_model,
    "bm-drift": brownian_drift_model,
    "tanh-vol": tanh_vol_model,
}


def make_model(name: str, b1_expr: str | None = None, b2_expr: str | None = None,
               x0: float | None = None) -> DiffusionModel:
    """Resolve a model by preset name, or build 'custom' from expressions."""
    if name == "custom":
        if b1_expr is None or b2_expr is None:
            raise ConfigError("custom model requires b1 and b2 expressions")
        return model_from_expressions(b1_expr, b2_expr, x0 if x0 is not None else 0.0)
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; presets: {sorted(PRESETS)} or 'custom'")
    return factory() if x0 is None else factory(x0=x0)


# -- validation --------------------------------------------------------------

def validate_derivatives(model: DiffusionModel, grid: np.ndarray | None = None,
                         rtol: float = 1e-5) -> None:
    """Check supplied derivatives of b1, b2 against central finite differences.

    Uses a fourth-order central stencil on a test grid inside the domain and
    compares at relative tolerance ``rtol`` (scale set by the larger of the
    two values and 1).  Raises ConfigError listing the first offender.
    """
    if grid is None:
        lo, hi = model.domain
        pad = 0.05 * (hi - lo)
        grid = np.linspace(lo + pad, hi - pad, 41)
    h = 1e-4 * max(1.0, float(np.max(np.abs(grid))))

    def stencil(f, x, step):
        return (8 * (f(x + step) - f(x - step)) - (f(x + 2 * step) - f(x - 2 * step))) / (12 * step)

    pairs = [
        ("d1_b1", model.b1, model.d1_b1),
        ("d2_b1", model.d1_b1, model.d2_b1),
        ("d3_b1", model.d2_b1, model.d3_b1),
        ("d4_b1", model.d3_b1, model.d4_b1),
        ("d1_b2", model.b2, model.d1_b2),
        ("d2_b2", model.d1_b2, model.d2_b2),
    ]
    for label, f, df in pairs:
        approx = stencil(f, grid, h)
        exact = df(grid)
        scale = np.maximum(1.0, np.maximum(np.abs(approx), np.abs(exact)))
        err = np.max(np.abs(approx - exact) / scale)
        if err > rtol:
            raise ConfigError(
                f"declared {label} disagrees with finite differences "
                f"(max relative error {err:.2e} > {rtol:g})"
            )
