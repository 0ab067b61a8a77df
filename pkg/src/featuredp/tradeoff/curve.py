"""Discretized trade-off functions and (epsilon, delta) conversion."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from featuredp.errors import DomainError

GRID_VERSION = 1
SCHEMA_VERSION = "1.0"
DEFAULT_GRID_SIZE = 4096

# Returned by to_epsilon when no finite epsilon exists at the requested delta.
INFINITE_EPSILON = math.inf

# Range of the standard-normal quantile grid; Phi(-20) ~ 3e-89 and Phi(7) stays resolvable below 1.
_Z_LOW = -20.0
_Z_HIGH = 7.0
_TOL = 1e-12
_ULP = 2.0**-52


@functools.lru_cache(maxsize=16)
def _cached_grid(grid_size: int) -> np.ndarray:
    z = np.linspace(_Z_LOW, _Z_HIGH, grid_size - 2)
    grid = np.unique(np.concatenate(([0.0], stats.norm.cdf(z), [1.0])))
    grid.flags.writeable = False
    return grid


def default_grid(grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Type-I error grid uniform in the normal quantile, including 0 and 1."""
    if grid_size < 3:
        raise DomainError(f"grid_size must be >= 3, got {grid_size}")
    return _cached_grid(int(grid_size))


def lower_convex_hull(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the lower convex hull of points sorted by strictly increasing x."""
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (xs[i1] - xs[i0]) * (ys[i] - ys[i0]) - (ys[i1] - ys[i0]) * (xs[i] - xs[i0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    idx = np.asarray(hull)
    return xs[idx], ys[idx]


@dataclass(frozen=True, eq=False)
class TradeoffCurve:
    """Piecewise-linear trade-off function sampled on a type-I error grid.

    ``betas[i]`` is the smallest type-II error achievable at type-I error
    ``alphas[i]``.  Values between grid points are linearly interpolated.
    """

    alphas: np.ndarray
    betas: np.ndarray
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=float)
        betas = np.array(self.betas, dtype=float)
        alphas.flags.writeable = False
        betas.flags.writeable = False
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)
        self.validate()

    @property
    def grid_size(self) -> int:
        return len(self.alphas)

    def validate(self) -> None:
        a, b = self.alphas, self.betas
        if a.ndim != 1 or a.shape != b.shape or len(a) < 2:
            raise DomainError("alphas and betas must be equal-length 1-d arrays")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("curve contains non-finite values")
        if a[0] != 0.0 or a[-1] != 1.0:
            raise DomainError("alpha grid must start at 0 and end at 1")
        if np.any(np.diff(a) <= 0):
            raise DomainError("alpha grid must be strictly increasing")
        if np.any(b < -_TOL) or np.any(b > 1 + _TOL):
            raise DomainError("betas must lie in [0, 1]")
        if np.any(np.diff(b) > _TOL):
            raise DomainError("trade-off curve must be non-increasing")
        if np.any(b > 1.0 - a + _TOL):
            raise DomainError("trade-off curve exceeds 1 - alpha")
        if b[-1] != 0.0:
            raise DomainError("trade-off curve must satisfy f(1) = 0")
        if len(a) > 2:
            w_left = a[1:-1] - a[:-2]
            w_right = a[2:] - a[1:-1]
            chord = (w_right * b[:-2] + w_left * b[2:]) / (w_left + w_right)
            if np.any(b[1:-1] > chord + _TOL):
                raise DomainError("trade-off curve is not convex")

    def __call__(self, alpha):
        return np.interp(alpha, self.alphas, self.betas)

    def inverse(self) -> "TradeoffCurve":
        """The curve obtained by swapping the roles of the two hypotheses."""
        xs = np.maximum.accumulate(self.betas[::-1])
        ys = self.alphas[::-1]
        ux, first = np.unique(xs, return_index=True)
        # keep the smallest y among duplicated x (the inf in the generalized inverse)
        uy = np.minimum.reduceat(ys, first) if len(first) else ys
        if ux[-1] < 1.0:
            ux = np.append(ux, 1.0)
            uy = np.append(uy, 0.0)
        else:
            uy[-1] = 0.0
        if ux[0] > 0.0:
            ux = np.insert(ux, 0, 0.0)
            uy = np.insert(uy, 0, 1.0)
        return from_points(ux, uy)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "grid_version": GRID_VERSION,
            "alphas": self.alphas.tolist(),
            "betas": self.betas.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TradeoffCurve":
        if doc.get("grid_version") != GRID_VERSION:
            raise DomainError(f"unsupported grid_version {doc.get('grid_version')!r}")
        return cls(np.asarray(doc["alphas"]), np.asarray(doc["betas"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "TradeoffCurve":
        return cls.from_json(json.loads(Path(path).read_text()))


def from_points(alphas, betas, grid=None) -> TradeoffCurve:
    """Build a valid curve from approximate vertices.

    Values are clipped into ``[0, 1 - alpha]`` and replaced by their lower
    convex hull, which can only make the curve more conservative.  When
    ``grid`` is given the hull is resampled onto ``grid`` united with the
    hull's own vertices.
    """
    a = np.asarray(alphas, dtype=float)
    b = np.clip(np.asarray(betas, dtype=float), 0.0, None)
    b = np.minimum(b, 1.0 - a)
    b[-1] = 0.0
    hx, hy = lower_convex_hull(a, b)
    if grid is not None:
        a = np.union1d(np.asarray(grid, dtype=float), hx)
    out = np.interp(a, hx, hy)
    out = np.minimum(np.minimum.accumulate(out), 1.0 - a)
    out[-1] = 0.0
    return TradeoffCurve(a, np.clip(out, 0.0, 1.0))


def identity_curve(grid_size: int = DEFAULT_GRID_SIZE, flags=()) -> TradeoffCurve:
    """f(alpha) = 1 - alpha: the two hypotheses are indistinguishable."""
    grid = default_grid(grid_size)
    return TradeoffCurve(grid, 1.0 - grid, flags=tuple(flags))


def gaussian_tradeoff(mu: float, grid_size: int = DEFAULT_GRID_SIZE) -> TradeoffCurve:
    """Trade-off between N(0, 1) and N(mu, 1): f(a) = Phi(Phi^-1(1 - a) - mu)."""
    if not mu >= 0:
        raise DomainError(f"mu must be non-negative, got {mu}")
    grid = default_grid(grid_size)
    if mu == 0:
        return TradeoffCurve(grid, 1.0 - grid)
    with np.errstate(divide="ignore"):
        betas = stats.norm.cdf(stats.norm.isf(grid) - mu)
    betas[0], betas[-1] = 1.0, 0.0
    return from_points(grid, betas)


def linear_curve(epsilon: float, delta: float, grid_size: int = DEFAULT_GRID_SIZE) -> TradeoffCurve:
    """The symmetric trade-off curve of an (epsilon, delta)-DP guarantee."""
    params = PrivacyParams(epsilon, delta)
    e = math.exp(params.epsilon)
    d = params.delta
    # exact kinks: where the two linear pieces meet and where the curve reaches 0
    kinks = [(1.0 - d) / (1.0 + e), 1.0 - d]
    grid = np.union1d(default_grid(grid_size), [k for k in kinks if 0.0 < k < 1.0])
    betas = np.maximum.reduce([
        np.zeros_like(grid),
        1.0 - d - e * grid,
        (1.0 - d - grid) / e,
    ])
    betas[-1] = 0.0
    return TradeoffCurve(grid, betas)


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")


def to_epsilon(curve: TradeoffCurve, delta: float) -> float:
    """Smallest epsilon such that the curve implies (epsilon, delta)-DP.

    Evaluates sup over alpha in (0, 1] of log((1 - delta - f(alpha)) / alpha).
    On a piecewise-linear curve this supremum is attained at a vertex or in
    the alpha -> 0 limit of the first segment, and both are checked.
    """
    if not 0.0 <= delta < 1.0:
        raise DomainError(f"delta must lie in [0, 1), got {delta}")
    a, b = curve.alphas, curve.betas
    gap0 = 1.0 - delta - b[0]
    if gap0 > _TOL:
        return INFINITE_EPSILON
    # betas near 1 carry one ulp of rounding, which tiny alphas would amplify
    numer = np.maximum(1.0 - delta - b[1:] - _ULP, 0.0)
    ratios = numer / a[1:]
    best = float(np.max(ratios))
    if gap0 >= -_TOL:
        # ratio tends to the negative slope of the first segment
        best = max(best, (b[0] - b[1]) / a[1])
    if best <= 1.0:
        return 0.0
    return math.log(best)


def sup_distance(c1: TradeoffCurve, c2: TradeoffCurve) -> float:
    """Sup-norm distance between two curves over the union of their grids."""
    grid = np.union1d(c1.alphas, c2.alphas)
    return float(np.max(np.abs(c1(grid) - c2(grid))))


def symmetrize(curve: TradeoffCurve) -> TradeoffCurve:
    """Convex hull of min(f, f^-1): valid for both hypothesis orders."""
    inv = curve.inverse()
    grid = np.union1d(curve.alphas, inv.alphas)
    return from_points(grid, np.minimum(curve(grid), inv(grid)))


def pointwise_min(*curves: TradeoffCurve) -> TradeoffCurve:
    """Convex hull of the pointwise minimum of several curves."""
    grid = functools.reduce(np.union1d, [c.alphas for c in curves])
    return from_points(grid, np.min([c(grid) for c in curves], axis=0))
