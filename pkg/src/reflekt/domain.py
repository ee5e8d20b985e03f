"""Axis-aligned box domains, diffusivities and tensorized quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

DEFAULT_QUAD_ORDER = 64
QUAD_TOL = 1e-8


@dataclass(frozen=True)
class BoxDomain:
    """Open box Π_i (lows[i], highs[i]) in R^d."""

    lows: tuple
    highs: tuple

    def __post_init__(self):
        lows = tuple(float(v) for v in self.lows)
        highs = tuple(float(v) for v in self.highs)
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        if len(lows) != len(highs) or not lows:
            raise ConfigurationError("lows/highs must be equal-length, nonempty")
        for lo, hi in zip(lows, highs):
            if not lo < hi:
                raise ConfigurationError(f"need lo < hi per axis, got [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.highs) - np.asarray(self.lows)

    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, x, atol=0.0) -> np.ndarray:
        """Componentwise membership in the closed box, batched over rows."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lows) - atol
        hi = np.asarray(self.highs) + atol
        return np.all((x >= lo) & (x <= hi), axis=1)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.lows)
        return lo + rng.random((n, self.dim)) * self.lengths

    def grid(self, per_axis: int) -> np.ndarray:
        """Regular interior grid (cell midpoints), flattened to (per_axis^d, d)."""
        axes = [
            lo + (np.arange(per_axis) + 0.5) * (hi - lo) / per_axis
            for lo, hi in zip(self.lows, self.highs)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def unit_interval() -> BoxDomain:
    return BoxDomain((0.0,), (1.0,))


@dataclass(frozen=True)
class Diffusivity:
    """Diffusion potential f, either constant or separable per axis.

    Separable means the generator splits as sum_i d/dx_i (f_i(x_i) d/dx_i),
    one strictly positive C^1 scalar function per axis.  For d=1 this is the
    general scalar potential; constant c reproduces c times the Neumann
    Laplacian.
    """

    kind: str  # "constant" | "separable1d"
    const: float = 1.0
    axis_funcs: tuple = field(default=())
    axis_derivs: tuple = field(default=())
    f_min: float = 1.0
    f_max: float = 1.0

    @staticmethod
    def constant(c: float) -> "Diffusivity":
        if c <= 0:
            raise ConfigurationError("constant diffusivity must be positive")
        return Diffusivity(kind="constant", const=float(c), f_min=float(c), f_max=float(c))

    @staticmethod
    def separable(
        funcs: Sequence[Callable[[np.ndarray], np.ndarray]],
        derivs: Sequence[Callable[[np.ndarray], np.ndarray]],
        domain: BoxDomain,
        probe: int = 512,
    ) -> "Diffusivity":
        if len(funcs) != domain.dim or len(derivs) != domain.dim:
            raise ConfigurationError("need one (f, f') pair per axis")
        fmin, fmax = np.inf, -np.inf
        for i, f in enumerate(funcs):
            xs = np.linspace(domain.lows[i], domain.highs[i], probe)
            vals = np.asarray(f(xs), dtype=float)
            if not np.all(np.isfinite(vals)) or vals.min() <= 0:
                raise ConfigurationError(f"axis {i} diffusivity must be positive and finite")
            fmin = min(fmin, float(vals.min()))
            fmax = max(fmax, float(vals.max()))
        return Diffusivity(
            kind="separable1d",
            axis_funcs=tuple(funcs),
            axis_derivs=tuple(derivs),
            f_min=fmin,
            f_max=fmax,
        )

    def axis_values(self, x: np.ndarray) -> np.ndarray:
        """Per-axis diffusivity f_i(x_i) for batched points, shape (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "constant":
            return np.full_like(x, self.const)
        cols = [np.asarray(f(x[:, i]), dtype=float) for i, f in enumerate(self.axis_funcs)]
        return np.stack(cols, axis=1)

    def drift(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the potential, the forward drift; shape (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "constant":
            return np.zeros_like(x)
        cols = [np.asarray(g(x[:, i]), dtype=float) for i, g in enumerate(self.axis_derivs)]
        return np.stack(cols, axis=1)

    def noise_scale(self, x: np.ndarray) -> np.ndarray:
        """Per-axis diffusion coefficient sqrt(2 f_i(x_i)), shape (n, d)."""
        return np.sqrt(2.0 * self.axis_values(x))


@lru_cache(maxsize=32)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def quad_rule(domain: BoxDomain, order: int = DEFAULT_QUAD_ORDER):
    """Tensorized Gauss-Legendre rule on the box.

    Returns (points, weights) with points of shape (order^d, d).  Exact for
    per-axis polynomials up to degree 2*order-1; adequate for the spectral
    series whenever the active mode count per axis stays well below order.
    """
    nodes, weights = _leggauss(order)
    axes_pts, axes_w = [], []
    for lo, hi in zip(domain.lows, domain.highs):
        half = 0.5 * (hi - lo)
        axes_pts.append(lo + half * (nodes + 1.0))
        axes_w.append(half * weights)
    mesh = np.meshgrid(*axes_pts, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    w = axes_w[0]
    for aw in axes_w[1:]:
        w = np.multiply.outer(w, aw).ravel()
    return pts, w


def integrate(domain: BoxDomain, fn, order: int = DEFAULT_QUAD_ORDER) -> float:
    pts, w = quad_rule(domain, order)
    return float(np.dot(w, np.asarray(fn(pts), dtype=float)))
