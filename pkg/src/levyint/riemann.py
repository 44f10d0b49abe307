"""Left-endpoint Riemann-sum stochastic integrals and mesh-refinement studies.

The integral of an adapted curve Phi against a driver path M is approximated
per path by sums of Phi at the left partition endpoint times the increment of
M over the interval; refining the partition witnesses the L2 limit.  The
integrand is evaluated AT the left endpoint (including any jump sitting
exactly there), never at its left limit; that convention is what makes the
limit agree with the Ito integral of the left-limit representative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drivers import LevySpec, martingale_part
from .ensembles import PathEnsemble, TimeGrid, _chunks, _pairing
from .errors import (
    AdaptednessError,
    ConsistencyError,
    GridError,
    InsufficientDataError,
)


@dataclass(frozen=True)
class RiemannSumResult:
    """Per-path left-endpoint sums at the partition's final time."""

    values: np.ndarray  # (n_paths, dim)
    partition: TimeGrid
    mesh: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ConsistencyError("partition sums must be finite")

    def scalar(self) -> np.ndarray:
        if self.values.shape[1] != 1:
            raise ConsistencyError("result is not scalar")
        return self.values[:, 0]


@dataclass(frozen=True)
class MeshStudy:
    """Squared L2 differences of partition sums against a reference.

    ``reference_mesh`` is the finest partition when the reference is the
    finest-mesh sum, or None when the reference is a closed-form value.
    """

    meshes: np.ndarray
    sq_differences: np.ndarray
    standard_errors: np.ndarray
    rate_exponent: float
    reference_mesh: float | None

    def __post_init__(self) -> None:
        if np.any(np.diff(self.meshes) >= 0):
            raise ConsistencyError("meshes must be strictly decreasing")
        if np.any(self.sq_differences < 0):
            raise ConsistencyError("squared differences must be nonnegative")

    def rows(self) -> list[tuple[float, float, float]]:
        return list(
            zip(
                self.meshes.tolist(),
                self.sq_differences.tolist(),
                self.standard_errors.tolist(),
            )
        )


def _require_adapted(phi: PathEnsemble) -> None:
    if not phi.adapted:
        raise AdaptednessError("integrand must be flagged adapted")


def _partition_indices(grid: TimeGrid, partition: TimeGrid) -> np.ndarray:
    try:
        return grid.indices_of(partition.points)
    except GridError as exc:
        raise GridError(f"partition is not contained in the grid: {exc}") from exc


def riemann_sum(
    phi: PathEnsemble, m: PathEnsemble, partition: TimeGrid
) -> RiemannSumResult:
    """Per-path sum of phi at left endpoints times increments of m.

    phi and m must be path-paired (common randomness) and both grids must
    contain every partition point exactly.
    """
    _require_adapted(phi)
    n = _pairing(phi, m)
    if m.dim != 1:
        raise ConsistencyError("integrator must be scalar")
    pi = _partition_indices(phi.grid, partition)
    mi = _partition_indices(m.grid, partition)
    out = np.empty((n, phi.dim))
    for sl in _chunks(n):
        pv = (phi.values[sl] if phi.n_paths == n else phi.values)[:, pi[:-1], :]
        mv = (m.values[sl] if m.n_paths == n else m.values)[:, mi, 0]
        dm = np.diff(mv, axis=1)
        if pv.shape[0] == 1 and dm.shape[0] > 1:
            out[sl] = np.einsum("jd,pj->pd", pv[0], dm)
        elif dm.shape[0] == 1 and pv.shape[0] > 1:
            out[sl] = np.einsum("pjd,j->pd", pv, dm[0])
        else:
            out[sl] = np.einsum("pjd,pj->pd", pv, dm)
    return RiemannSumResult(values=out, partition=partition, mesh=partition.mesh)


def integral_process(phi: PathEnsemble, m: PathEnsemble) -> PathEnsemble:
    """Cumulative left-endpoint sums of phi against m on their common grid.

    The result starts at 0 and is adapted; it is continuous exactly when the
    integrator is.
    """
    _require_adapted(phi)
    n = _pairing(phi, m)
    if m.dim != 1:
        raise ConsistencyError("integrator must be scalar")
    if phi.grid != m.grid:
        raise ConsistencyError("cumulative integral needs a common grid")
    out = np.empty((n, phi.grid.n_points, phi.dim))
    out[:, 0, :] = 0.0
    for sl in _chunks(n):
        pv = phi.values[sl] if phi.n_paths == n else phi.values
        mv = m.values[sl] if m.n_paths == n else m.values
        steps = pv[:, :-1, :] * np.diff(mv[:, :, 0], axis=1)[:, :, None]
        np.cumsum(steps, axis=1, out=out[sl, 1:, :])
    return PathEnsemble(
        values=out,
        grid=phi.grid,
        adapted=True,
        continuous=m.continuous,
        meta={"integral_of": phi.meta.get("spec"), "against": m.meta.get("spec")},
    )


def bochner_integral(phi: PathEnsemble) -> PathEnsemble:
    """Cumulative left-endpoint time quadrature: sum of phi_{t_i} * dt_i."""
    dt = phi.grid.dt
    out = np.empty_like(phi.values)
    out[:, 0, :] = 0.0
    for sl in _chunks(phi.n_paths):
        steps = phi.values[sl, :-1, :] * dt[None, :, None]
        np.cumsum(steps, axis=1, out=out[sl, 1:, :])
    return PathEnsemble(
        values=out,
        grid=phi.grid,
        adapted=phi.adapted,
        continuous=True,
        meta={"time_integral_of": phi.meta.get("spec")},
    )


def levy_integral(phi: PathEnsemble, spec: LevySpec, x: PathEnsemble) -> PathEnsemble:
    """Integral of phi against the full driver X = M + b*t.

    Computed literally as the martingale-part integral plus b times the time
    quadrature, so the decomposition recombines exactly per path.
    """
    src = x.meta.get("spec")
    if src is not None and src != spec:
        raise ConsistencyError(f"driver ensemble was simulated from {src!r}, not {spec!r}")
    m = martingale_part(spec, x)
    mart = integral_process(phi, m)
    b = spec.martingale_drift
    if b == 0.0:
        return mart
    time_part = bochner_integral(phi)
    return mart.with_values(mart.values + b * time_part.values)


def mesh_convergence_study(
    phi: PathEnsemble,
    m: PathEnsemble,
    meshes: np.ndarray,
    t: float,
) -> MeshStudy:
    """Cauchy-in-mesh evidence: partition sums against the finest-mesh sum.

    All partitions are uniform subdivisions of [0, t] nested in the common
    simulation grid; the finest mesh provides the per-path reference values
    and the remaining meshes report E|Y_mesh - Y_ref|^2 with standard errors
    plus a least-squares rate exponent in log-log coordinates.
    """
    meshes = np.asarray(meshes, dtype=np.float64)
    if meshes.size < 3:
        raise InsufficientDataError("a mesh study needs at least three meshes")
    if np.any(np.diff(meshes) >= 0):
        raise InsufficientDataError("meshes must be strictly decreasing")
    if phi.grid != m.grid:
        raise ConsistencyError("study needs a common simulation grid")

    partitions = [uniform_partition(phi.grid, t, h) for h in meshes]
    ref = riemann_sum(phi, m, partitions[-1]).values
    rows = []
    for part in partitions[:-1]:
        diff = riemann_sum(phi, m, part).values - ref
        sq = np.einsum("pd,pd->p", diff, diff)
        n = sq.size
        se = float(np.std(sq, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        rows.append((float(part.mesh), float(np.mean(sq)), se))
    # the reference mesh closes the table with its zero self-difference; the
    # rate fit uses the positive entries only
    rows.append((float(partitions[-1].mesh), 0.0, 0.0))
    used_meshes = np.array([r[0] for r in rows])
    sq_diffs = np.array([r[1] for r in rows])
    ses = np.array([r[2] for r in rows])
    exponent = fit_rate_exponent(used_meshes, sq_diffs)
    return MeshStudy(
        meshes=used_meshes,
        sq_differences=sq_diffs,
        standard_errors=ses,
        rate_exponent=exponent,
        reference_mesh=float(partitions[-1].mesh),
    )


def uniform_partition(grid: TimeGrid, t: float, mesh: float) -> TimeGrid:
    """Uniform-stride subset of a uniform grid partitioning [0, t].

    The requested mesh must be an integer multiple of the grid spacing and
    divide t; the returned partition's points are grid points, so sums over
    it incur no interpolation.
    """
    dt = grid.dt
    h = float(dt[0])
    if not np.allclose(dt, h, rtol=0, atol=1e-12 * h):
        raise GridError("uniform partitions need a uniform base grid")
    stride = int(round(mesh / h))
    if stride < 1 or abs(stride * h - mesh) > 1e-9 * h:
        raise GridError(f"mesh {mesh} is not a multiple of the grid spacing {h}")
    end = grid.index_of(t)
    if end % stride != 0:
        raise GridError(f"mesh {mesh} does not divide [0, {t}]")
    return TimeGrid(grid.points[: end + 1 : stride])


def fit_rate_exponent(meshes: np.ndarray, sq_diffs: np.ndarray) -> float:
    """Least-squares slope of log squared difference against log mesh."""
    mask = sq_diffs > 0
    if np.count_nonzero(mask) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(meshes[mask]), np.log(sq_diffs[mask]), 1)
    return float(slope)


def increment_independence_z(phi: PathEnsemble, m: PathEnsemble) -> np.ndarray:
    """Per-interval z-scores of cov(phi_{t_i}, M_{t_{i+1}} - M_{t_i}).

    Adapted integrands against independent-increment drivers should produce
    covariances compatible with zero; large |z| indicates look-ahead bias.
    Multidimensional integrands are reduced along coordinates by averaging.
    """
    n = _pairing(phi, m)
    if n < 2:
        raise ConsistencyError("covariance needs at least two paths")
    k = phi.grid.n_intervals
    s_p = np.zeros(k)
    s_d = np.zeros(k)
    s_pd = np.zeros(k)
    s_pd2 = np.zeros(k)
    for sl in _chunks(n):
        pv = (phi.values[sl] if phi.n_paths == n else np.broadcast_to(phi.values, (sl.stop - sl.start,) + phi.values.shape[1:]))[:, :-1, :].mean(axis=2)
        dv = np.diff((m.values[sl] if m.n_paths == n else m.values)[:, :, 0], axis=1)
        s_p += pv.sum(axis=0)
        s_d += dv.sum(axis=0)
        prod = pv * dv
        s_pd += prod.sum(axis=0)
        s_pd2 += (prod * prod).sum(axis=0)
    mean_p, mean_d, mean_pd = s_p / n, s_d / n, s_pd / n
    cov = mean_pd - mean_p * mean_d
    # SE of the covariance estimated from the spread of the products
    var_pd = np.maximum(s_pd2 / n - mean_pd**2, 0.0) * n / (n - 1)
    se = np.sqrt(var_pd / n)
    z = np.where(se > 0, cov / np.maximum(se, 1e-300), 0.0)
    return z
