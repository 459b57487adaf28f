"""Path simulation for martingales with a deterministic time change.

The simulated process is X_t = B_{h(t)} on a finite grid 0 = t_0 < ... <
t_M = T: Gaussian increments with variances h(t_{k+1}) - h(t_k), so the
quadratic variation of X on [0, t] is exactly h(t).

Randomness contract: paths are generated in fixed-size blocks of
``BLOCK_PATHS`` rows; block b of seed s uses an independent Philox stream
keyed by (s, b) and fills its rows in one vectorized draw.  Path i of seed s
is therefore a pure function of (s, i) - independent of the total path
count, of how work is distributed across workers, and of everything
generated before or after.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "BLOCK_PATHS",
    "GENERATOR_NAME",
    "InvalidTimeChangeError",
    "TimeChange",
    "TimeGrid",
    "PathEnsemble",
    "generate",
    "quadratic_variation_at",
]

BLOCK_PATHS = 16384
GENERATOR_NAME = "philox-blocked"


class InvalidTimeChangeError(ValueError):
    """Raised when a time change is decreasing or negative on the grid."""


@dataclass(frozen=True)
class TimeChange:
    """Deterministic quadratic-variation schedule h with h(0) = 0.

    Kinds: ``identity`` (h(t) = t, standard Brownian motion), ``power``
    (h(t) = t**alpha, alpha > 0) and ``piecewise`` (linear interpolation of
    (t, v) knots, held constant beyond the last knot).
    """

    kind: str
    alpha: float = 1.0
    knots: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "identity":
            return
        if self.kind == "power":
            if not (math.isfinite(self.alpha) and self.alpha > 0):
                raise InvalidTimeChangeError(f"power exponent must be > 0, got {self.alpha!r}")
            return
        if self.kind == "piecewise":
            k = self.knots
            if len(k) < 2 or k[0] != (0.0, 0.0):
                raise InvalidTimeChangeError("piecewise knots must start at (0, 0)")
            for (t0, v0), (t1, v1) in zip(k, k[1:]):
                if not t1 > t0:
                    raise InvalidTimeChangeError("piecewise knot times must strictly increase")
                if v1 < v0:
                    raise InvalidTimeChangeError("piecewise knot values must be nondecreasing")
            if any(not (math.isfinite(t) and math.isfinite(v)) for t, v in k):
                raise InvalidTimeChangeError("piecewise knots must be finite")
            return
        raise InvalidTimeChangeError(f"unknown time change kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "TimeChange":
        return cls("identity")

    @classmethod
    def power(cls, alpha: float) -> "TimeChange":
        return cls("power", alpha=float(alpha))

    @classmethod
    def piecewise_linear(cls, knots: Iterable[tuple[float, float]]) -> "TimeChange":
        return cls("piecewise", knots=tuple((float(t), float(v)) for t, v in knots))

    def __call__(self, t):
        if self.kind == "identity":
            return np.asarray(t, dtype=float) + 0.0 if np.ndim(t) else float(t)
        if self.kind == "power":
            return np.asarray(t, dtype=float) ** self.alpha if np.ndim(t) else float(t) ** self.alpha
        ts = np.array([k[0] for k in self.knots])
        vs = np.array([k[1] for k in self.knots])
        out = np.interp(t, ts, vs)
        return out if np.ndim(t) else float(out)


def quadratic_variation_at(h: TimeChange, t: float, horizon: float | None = None) -> float:
    """q = h(t), with range validation against [0, horizon]."""
    t = float(t)
    if t < 0 or (horizon is not None and t > horizon + 1e-12):
        raise ValueError(f"time {t!r} outside [0, {horizon!r}]")
    q = float(h(t))
    if q < 0:
        raise InvalidTimeChangeError(f"time change is negative at t={t!r}")
    return q


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing grid 0 = t_0 < t_1 < ... < t_M = T."""

    points: tuple[float, ...]

    def __post_init__(self) -> None:
        # plain floats: grid values feed reports and comparisons, where numpy
        # scalars would leak (np.bool_ is not JSON-serializable)
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        pts = self.points
        if len(pts) < 2:
            raise ValueError("grid needs at least two points (M >= 1)")
        if pts[0] != 0.0:
            raise ValueError("grid must start at t = 0")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("grid points must strictly increase")
        if any(not math.isfinite(p) for p in pts):
            raise ValueError("grid points must be finite")

    @classmethod
    def uniform(cls, horizon: float, steps: int) -> "TimeGrid":
        if steps < 1 or not math.isfinite(horizon) or horizon <= 0:
            raise ValueError("need steps >= 1 and horizon > 0")
        return cls(tuple(np.linspace(0.0, float(horizon), steps + 1)))

    @property
    def horizon(self) -> float:
        return self.points[-1]

    @property
    def steps(self) -> int:
        return len(self.points) - 1

    def index_of(self, t: float) -> int:
        """Index of a grid point equal to t (within 1e-12)."""
        arr = np.asarray(self.points)
        k = int(np.argmin(np.abs(arr - t)))
        if abs(arr[k] - t) > 1e-12:
            raise ValueError(f"t={t!r} is not a grid point")
        return k

    def refined(self) -> "TimeGrid":
        """Grid with midpoints inserted (2M steps), for refinement studies."""
        pts = np.asarray(self.points)
        mids = 0.5 * (pts[:-1] + pts[1:])
        out = np.empty(2 * len(pts) - 1)
        out[0::2] = pts
        out[1::2] = mids
        return TimeGrid(tuple(out))


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """N sampled paths of X on a grid; paths[i, k] = X_{t_k} of path i."""

    grid: TimeGrid
    time_change: TimeChange
    paths: np.ndarray = field(repr=False)
    seed: int
    generator: str = GENERATOR_NAME

    def __post_init__(self) -> None:
        if self.paths.ndim != 2 or self.paths.shape[1] != len(self.grid.points):
            raise ValueError("paths must be N x (M+1)")
        if self.paths.shape[0] < 1:
            raise ValueError("ensemble needs at least one path")
        if np.any(self.paths[:, 0] != 0.0):
            raise ValueError("paths must start at X_0 = 0")
        if not np.all(np.isfinite(self.paths)):
            raise ValueError("paths must be finite")

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def values_at(self, t: float) -> np.ndarray:
        return self.paths[:, self.grid.index_of(t)]

    def realized_quadratic_variation(self) -> np.ndarray:
        """Per-path sum of squared increments over the whole grid."""
        inc = np.diff(self.paths, axis=1)
        return np.einsum("ij,ij->i", inc, inc)

    def dump_csv(self, path: str) -> None:
        header = ",".join(f"t={p!r}" for p in self.grid.points)
        np.savetxt(path, self.paths, delimiter=",", header=header, comments="# ")


def _grid_variances(h: TimeChange, grid: TimeGrid) -> np.ndarray:
    hv = np.asarray(h(np.asarray(grid.points)), dtype=float)
    if hv[0] != 0.0:
        raise InvalidTimeChangeError("time change must satisfy h(0) = 0")
    dv = np.diff(hv)
    if np.any(dv < -1e-12):
        raise InvalidTimeChangeError("time change must be nondecreasing on the grid")
    return np.maximum(dv, 0.0)


def generate(h: TimeChange, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """Sample n_paths independent paths of X_t = B_{h(t)} on the grid.

    Block b draws from Philox keyed by seed * 2**64 + b, so any path index
    maps to the same numbers regardless of n_paths or scheduling.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be >= 0")
    dv = _grid_variances(h, grid)
    stds = np.sqrt(dv)
    m = len(dv)
    paths = np.empty((n_paths, m + 1), dtype=float)
    paths[:, 0] = 0.0
    for start in range(0, n_paths, BLOCK_PATHS):
        stop = min(start + BLOCK_PATHS, n_paths)
        block_index = start // BLOCK_PATHS
        rng = np.random.Generator(np.random.Philox(key=seed * 2**64 + block_index))
        draws = rng.standard_normal((BLOCK_PATHS, m))[: stop - start]
        np.cumsum(draws * stds, axis=1, out=paths[start:stop, 1:])
    return PathEnsemble(grid=grid, time_change=h, paths=paths, seed=seed)
