"""Time grids, Monte Carlo path ensembles, and empirical L2-curve reductions.

An ensemble of sampled paths is treated as a curve t -> L2(Omega; R^dim):
expectations become averages over paths, and the curve norm is the sup over
grid points of the root mean squared Euclidean norm.  All reductions are
chunked over paths so that large ensembles (1e5 paths x 1e3 grid points)
never allocate full-size temporaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .errors import (
    ConsistencyError,
    EmptyEnsembleError,
    GridError,
    MissingJumpDataError,
)

# rows per block in chunked path reductions; results do not depend on it
_CHUNK_ROWS = 4096


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


def _chunks(n: int, size: int | None = None) -> Iterator[slice]:
    size = size if size is not None else _CHUNK_ROWS
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing partition 0 = t_0 < t_1 < ... < t_n = T."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = _readonly(np.asarray(self.points, dtype=np.float64).ravel())
        object.__setattr__(self, "points", pts)
        if pts.size < 2:
            raise GridError("a grid needs at least one interval")
        if pts[0] != 0.0:
            raise GridError(f"grid must start at 0, got {pts[0]}")
        if not np.all(np.diff(pts) > 0.0):
            raise GridError("grid points must be strictly increasing")

    @classmethod
    def uniform(cls, horizon: float, n_steps: int) -> "TimeGrid":
        if horizon <= 0 or n_steps < 1:
            raise GridError("horizon must be positive and n_steps >= 1")
        return cls(np.linspace(0.0, float(horizon), n_steps + 1))

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def n_points(self) -> int:
        return int(self.points.size)

    @property
    def n_intervals(self) -> int:
        return self.n_points - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def mesh(self) -> float:
        return float(np.max(self.dt))

    def index_of(self, t: float) -> int:
        """Index of an exactly matching grid point; GridError if absent."""
        i = int(np.searchsorted(self.points, t))
        if i >= self.n_points or self.points[i] != t:
            raise GridError(f"time {t!r} is not a grid point")
        return i

    def nearest_index(self, t: float) -> int:
        """Index of the grid point closest to t."""
        return int(np.argmin(np.abs(self.points - t)))

    def indices_of(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=np.float64)
        idx = np.searchsorted(self.points, times)
        ok = (idx < self.n_points) & (self.points[np.minimum(idx, self.n_points - 1)] == times)
        if not np.all(ok):
            missing = times[~ok]
            raise GridError(f"times not on grid: {missing[:5]!r}")
        return idx

    def augmented(self, extra: np.ndarray) -> "TimeGrid":
        """New grid containing the old points plus the given times in (0, T]."""
        extra = np.asarray(extra, dtype=np.float64).ravel()
        if extra.size and (np.min(extra) <= 0.0 or np.max(extra) > self.horizon):
            raise GridError("augmentation times must lie in (0, T]")
        return TimeGrid(np.union1d(self.points, extra))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.all(self.points == other.points)
        )

    def __hash__(self) -> int:
        return hash(self.points.tobytes())


@dataclass(frozen=True)
class JumpRecord:
    """Exact jump times and sizes of one sampled path."""

    times: np.ndarray
    sizes: np.ndarray

    def __post_init__(self) -> None:
        t = _readonly(np.asarray(self.times, dtype=np.float64).ravel())
        s = _readonly(np.asarray(self.sizes, dtype=np.float64).ravel())
        if t.size != s.size:
            raise ConsistencyError("jump times and sizes must have equal length")
        if t.size and not np.all(np.diff(t) > 0.0):
            raise ConsistencyError("jump times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "sizes", s)

    @property
    def count(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class PathEnsemble:
    """Sampled paths on a common grid, values in R^dim.

    values has shape (n_paths, n_points, dim) and is read-only after
    construction; derived ensembles are built with :meth:`with_values`.
    Deterministic curves are stored as single-path ensembles and broadcast
    against sampled ones in pairwise operations.

    Flags record how the ensemble was constructed:  ``adapted`` asserts that
    the value at t_j used driver information from [0, t_j] only;
    ``continuous`` marks paths that are continuous by construction;
    ``grid_predictable`` marks left-limit representatives.
    """

    values: np.ndarray
    grid: TimeGrid
    adapted: bool = False
    continuous: bool = False
    grid_predictable: bool = False
    jumps: tuple[JumpRecord, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise ConsistencyError("values must have shape (n_paths, n_points, dim)")
        if v.shape[0] < 1 or v.shape[2] < 1:
            raise EmptyEnsembleError("ensemble needs at least one path and one dimension")
        if v.shape[1] != self.grid.n_points:
            raise ConsistencyError(
                f"values have {v.shape[1]} time slots, grid has {self.grid.n_points}"
            )
        object.__setattr__(self, "values", _readonly(v))
        if self.jumps is not None and len(self.jumps) != v.shape[0]:
            raise ConsistencyError("need one JumpRecord per path")

    @property
    def n_paths(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_points(self) -> int:
        return int(self.values.shape[1])

    @property
    def dim(self) -> int:
        return int(self.values.shape[2])

    def with_values(self, values: np.ndarray, **overrides) -> "PathEnsemble":
        """Same metadata, new values (flags overridable by keyword)."""
        kwargs = dict(
            grid=self.grid,
            adapted=self.adapted,
            continuous=self.continuous,
            grid_predictable=self.grid_predictable,
            jumps=self.jumps,
            meta=dict(self.meta),
        )
        kwargs.update(overrides)
        return PathEnsemble(values=values, **kwargs)

    def scalar_values(self) -> np.ndarray:
        if self.dim != 1:
            raise ConsistencyError(f"expected scalar ensemble, dim={self.dim}")
        return self.values[:, :, 0]

    @classmethod
    def deterministic(
        cls,
        grid: TimeGrid,
        fn: Callable[[np.ndarray], np.ndarray] | float,
        dim: int = 1,
    ) -> "PathEnsemble":
        """Single-path ensemble for a deterministic curve t -> R^dim.

        ``fn`` is either a constant or a vectorized map of the grid points;
        a scalar-valued map is replicated across coordinates.
        """
        t = grid.points
        if callable(fn):
            vals = np.asarray(fn(t), dtype=np.float64)
        else:
            vals = np.full(t.shape, float(fn))
        if vals.ndim == 1:
            vals = np.repeat(vals[:, None], dim, axis=1)
        if vals.shape != (grid.n_points, dim):
            raise ConsistencyError(f"curve values have shape {vals.shape}")
        return cls(
            values=vals[None, :, :],
            grid=grid,
            adapted=True,
            continuous=True,
            meta={"deterministic": True},
        )


def _pairing(a: PathEnsemble, b: PathEnsemble) -> int:
    """Validate that two ensembles are path-paired; return common n_paths."""
    if a.grid != b.grid:
        raise ConsistencyError("ensembles live on different grids")
    if a.dim != b.dim and 1 not in (a.dim, b.dim):
        raise ConsistencyError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.n_paths != b.n_paths and 1 not in (a.n_paths, b.n_paths):
        raise ConsistencyError(f"path count mismatch: {a.n_paths} vs {b.n_paths}")
    return max(a.n_paths, b.n_paths)


def second_moments(ensemble: PathEnsemble) -> np.ndarray:
    """Per-gridpoint E||r_t||^2 estimated by the path average."""
    if ensemble.values.size == 0:
        raise EmptyEnsembleError("empty ensemble")
    acc = np.zeros(ensemble.n_points)
    for sl in _chunks(ensemble.n_paths):
        block = ensemble.values[sl]
        acc += np.einsum("pjd,pjd->j", block, block)
    return acc / ensemble.n_paths


def sup_l2_norm(ensemble: PathEnsemble) -> float:
    """sup over grid points of sqrt(E||r_t||^2)."""
    return float(np.sqrt(np.max(second_moments(ensemble))))


def l2_distance(a: PathEnsemble, b: PathEnsemble) -> float:
    """Sup-L2 norm of the path-pairwise difference a - b.

    Single-path (deterministic) ensembles broadcast against sampled ones.
    """
    n = _pairing(a, b)
    acc = np.zeros(a.grid.n_points)
    for sl in _chunks(n):
        xa = a.values[sl] if a.n_paths == n else a.values
        xb = b.values[sl] if b.n_paths == n else b.values
        d = xa - xb
        acc += np.einsum("pjd,pjd->j", d, d)
    return float(np.sqrt(np.max(acc / n)))


@dataclass(frozen=True)
class ModulusReport:
    """Mean-square increment norms over adjacent grid intervals."""

    gaps: np.ndarray
    norms: np.ndarray
    standard_errors: np.ndarray

    @property
    def max_norm(self) -> float:
        return float(np.max(self.norms))

    @property
    def max_standard_error(self) -> float:
        return float(self.standard_errors[int(np.argmax(self.norms))])

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.gaps.tolist(), self.norms.tolist()))


def ms_continuity_modulus(ensemble: PathEnsemble) -> ModulusReport:
    """sqrt(E||r_{t_{j+1}} - r_{t_j}||^2) for each adjacent pair of grid points.

    Standard errors are for the reported root-mean-square values (delta
    method), so refinement comparisons can carry statistical slack.
    """
    if ensemble.grid.n_points < 2:
        raise GridError("modulus needs at least two grid points")
    n = ensemble.n_paths
    m = ensemble.grid.n_intervals
    acc = np.zeros(m)
    acc_sq = np.zeros(m)
    for sl in _chunks(n):
        block = ensemble.values[sl]
        d = block[:, 1:, :] - block[:, :-1, :]
        s = np.einsum("pjd,pjd->pj", d, d)
        acc += s.sum(axis=0)
        acc_sq += (s * s).sum(axis=0)
    mean_sq = acc / n
    if n > 1:
        var_sq = np.maximum(acc_sq / n - mean_sq**2, 0.0) * n / (n - 1)
        se_mean = np.sqrt(var_sq / n)
    else:
        se_mean = np.zeros(m)
    norms = np.sqrt(mean_sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        se_norm = np.where(norms > 0, se_mean / (2 * np.maximum(norms, 1e-300)), 0.0)
    return ModulusReport(gaps=ensemble.grid.dt, norms=norms, standard_errors=se_norm)


@dataclass(frozen=True)
class L2CurveStats:
    """Summary statistics of an ensemble viewed as an empirical L2-curve."""

    second_moments: np.ndarray
    sup_norm: float
    modulus: ModulusReport

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.second_moments)) or np.any(self.second_moments < 0):
            raise ConsistencyError("second moments must be finite and nonnegative")


def curve_stats(ensemble: PathEnsemble) -> L2CurveStats:
    m2 = second_moments(ensemble)
    return L2CurveStats(
        second_moments=m2,
        sup_norm=float(np.sqrt(np.max(m2))),
        modulus=ms_continuity_modulus(ensemble),
    )


def left_limit(ensemble: PathEnsemble) -> PathEnsemble:
    """Pre-jump representative of a cadlag ensemble.

    At a grid point that coincides exactly with a recorded jump time the
    value is replaced by the value just before that jump; everywhere else the
    path is unchanged.  Continuous ensembles and ensembles already flagged as
    left-limit representatives are returned as-is (the map is idempotent).
    """
    if ensemble.grid_predictable:
        return ensemble
    if ensemble.continuous:
        return replace(ensemble, grid_predictable=True)
    if ensemble.jumps is None:
        raise MissingJumpDataError(
            "discontinuous ensemble without jump records has no computable left limit"
        )
    values = np.array(ensemble.values)
    pts = ensemble.grid.points
    n_pts = ensemble.grid.n_points
    for p, rec in enumerate(ensemble.jumps):
        if rec.count == 0:
            continue
        idx = np.searchsorted(pts, rec.times)
        on_grid = idx < n_pts
        on_grid[on_grid] &= pts[idx[on_grid]] == rec.times[on_grid]
        if np.any(on_grid):
            values[p, idx[on_grid], :] -= rec.sizes[on_grid, None]
    return ensemble.with_values(values, grid_predictable=True)


def ensemble_rows(ensemble: PathEnsemble) -> Iterator[tuple]:
    """Rows (path id, t, value components) for columnar export."""
    t = ensemble.grid.points
    for p in range(ensemble.n_paths):
        for j in range(ensemble.n_points):
            yield (p, float(t[j]), *ensemble.values[p, j, :].tolist())
