"""Path generation for ``X`` and for the driven Ornstein-Uhlenbeck process ``Z``.

Paths are sampled on a grid ``0 = t_0 < t_1 < ... < t_n``.  Pathwise
functionals treat a sampled path as its piecewise-linear interpolant, so
that the Stieltjes integrals and the OU solution are exact for that
continuous path.

Random numbers: path ``i`` of a batch with seed ``s`` draws from a Philox
stream keyed by ``(s, i)``, so batches can be split or parallelised
without changing any path.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from gvp import core
from gvp.covariance import grid_cov
from gvp.errors import DomainError
from gvp.kernels import inner_kernel
from gvp.model import ProcessParams, _as_params
from gvp.quadrature import gauss_jacobi

_MAGIC = b"GVPPATH1"
DEFAULT_REFINEMENT = 16


class Method(str, enum.Enum):
    CHOLESKY = "cholesky"
    KERNEL_RIEMANN = "kernel_riemann"


class Scheme(str, enum.Enum):
    """Discretisation of the Langevin equation."""

    EXACT = "exact"
    EULER = "euler"


@dataclass(frozen=True)
class GridPath:
    grid: np.ndarray
    values: np.ndarray
    seed: int
    method: str
    stream: int = 0

    def __post_init__(self):
        if self.grid.shape != self.values.shape:
            raise DomainError("grid and values must have the same length")
        if self.values[0] != 0.0:
            raise DomainError("paths start at zero")

    def index_of(self, T: float) -> int:
        """Grid index of time ``T`` (must be a grid point)."""
        return _index_of(self.grid, T)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.grid, self.values):
                fh.write(f"{float(t)!r},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path, *, seed: int = 0, method: str = "cholesky") -> "GridPath":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(grid=data[:, 0].copy(), values=data[:, 1].copy(), seed=seed, method=method)


@dataclass(frozen=True)
class PathBatch:
    """Many paths on one grid; row ``i`` uses stream ``i`` of ``seed``."""

    grid: np.ndarray
    values: np.ndarray
    seed: int
    method: str
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.values.shape[0]

    def path(self, i: int) -> GridPath:
        return GridPath(self.grid, self.values[i], self.seed, self.method, stream=i)

    def index_of(self, T: float) -> int:
        return _index_of(self.grid, T)


@dataclass(frozen=True)
class OUModel:
    params: ProcessParams
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "params", _as_params(self.params))
        if not self.theta > 0:
            raise DomainError(f"theta must be positive, got {self.theta}")


def _index_of(grid: np.ndarray, T: float) -> int:
    k = int(np.searchsorted(grid, T))
    if k < grid.size and np.isclose(grid[k], T, rtol=1e-12, atol=0.0):
        return k
    if k > 0 and np.isclose(grid[k - 1], T, rtol=1e-12, atol=0.0):
        return k - 1
    raise DomainError(f"T={T} is not a grid point")


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise DomainError("grid needs at least two points")
    if grid[0] != 0.0:
        raise DomainError("grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    return grid


def uniform_grid(t_max: float, points: int) -> np.ndarray:
    return np.linspace(0.0, float(t_max), int(points))


def geometric_grid(t_max: float, points: int, t_min: float | None = None) -> np.ndarray:
    """``0`` followed by ``points - 1`` geometrically spaced times up to ``t_max``."""
    t_min = t_max * 1e-3 if t_min is None else t_min
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, int(points) - 1)])


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for path ``index`` of base seed ``seed``."""
    if seed < 0 or index < 0:
        raise DomainError("seed and stream index must be nonnegative")
    return np.random.Generator(np.random.Philox(key=(int(index) << 64) | (int(seed) & (2**64 - 1))))


def _normals(seed: int, n_paths: int, size: int, first: int = 0) -> np.ndarray:
    out = np.empty((n_paths, size))
    for i in range(n_paths):
        out[i] = stream(seed, first + i).standard_normal(size)
    return out


@lru_cache(maxsize=8)
def _cholesky_cached(p: ProcessParams, grid_bytes: bytes) -> np.ndarray:
    grid = np.frombuffer(grid_bytes)
    factor = grid_cov(p, grid[1:]).cholesky()
    factor.setflags(write=False)
    return factor


def cholesky_factor(p, grid) -> np.ndarray:
    """Lower Cholesky factor of the covariance on ``grid[1:]`` (cached)."""
    grid = check_grid(grid)
    return _cholesky_cached(_as_params(p), grid.tobytes())


def _cell_average(p: ProcessParams, t: float, a, b, first, last, n=8):
    """Average of ``s -> K(t, s)`` over cells ``[a, b]``.

    The first cell carries the ``s^alpha`` endpoint and the cell ending at
    ``t`` the ``(t - s)^(gamma + 1)`` endpoint; both are absorbed into
    Jacobi weights.
    """
    out = np.empty(a.size)
    kinds = [
        (~first & ~last, 0.0, 0.0),
        (first & ~last, p.alpha, 0.0),
        (~first & last, 0.0, p.gamma + 1.0),
        (first & last, p.alpha, p.gamma + 1.0),
    ]
    for mask, pw, qw in kinds:
        if not np.any(mask):
            continue
        x, w = gauss_jacobi(n, pw, qw)
        aa, bb = a[mask][:, None], b[mask][:, None]
        h = bb - aa
        s = aa + h * x[None, :]
        u = (s - aa) / h
        weight = u**pw * (1.0 - u) ** qw
        ker = s**p.alpha * inner_kernel(p, s, t - s)
        out[mask] = (ker / weight * w[None, :]).sum(axis=1)
    return out


def riemann_matrix(p, grid, refinement: int = DEFAULT_REFINEMENT):
    """Matrix ``M`` and latent cell widths with ``X(grid[1:]) = M dW``.

    Each observation cell is split into ``refinement`` equal latent cells;
    ``M[j, i]`` is the kernel ``K(t_j, .)`` averaged over latent cell ``i``.
    """
    p = _as_params(p)
    grid = check_grid(grid)
    if refinement < 1:
        raise DomainError("refinement must be at least 1")
    frac = np.arange(refinement + 1) / refinement
    edges = np.concatenate(
        [[0.0]] + [grid[j] + (grid[j + 1] - grid[j]) * frac[1:] for j in range(grid.size - 1)]
    )
    lo, hi = edges[:-1], edges[1:]
    m = np.zeros((grid.size - 1, lo.size))
    for j in range(1, grid.size):
        ncell = j * refinement
        a, b = lo[:ncell], hi[:ncell]
        first = np.zeros(ncell, dtype=bool)
        first[0] = True
        last = np.zeros(ncell, dtype=bool)
        last[-1] = True
        m[j - 1, :ncell] = _cell_average(p, grid[j], a, b, first, last)
    return m, hi - lo


def riemann_covariance(p, grid, refinement: int = DEFAULT_REFINEMENT) -> np.ndarray:
    """Exact covariance of the kernel-Riemann scheme on ``grid[1:]``."""
    m, h = riemann_matrix(p, grid, refinement)
    return (m * h) @ m.T


def simulate_paths(
    p, grid, seed: int, n_paths: int = 1, method: str = "cholesky", *, refinement: int = DEFAULT_REFINEMENT, first: int = 0
) -> PathBatch:
    """Sample ``n_paths`` paths of ``X`` (streams ``first .. first+n_paths-1``)."""
    p = _as_params(p)
    grid = check_grid(grid)
    method = Method(method).value
    values = np.zeros((n_paths, grid.size))
    if method == Method.CHOLESKY.value:
        factor = cholesky_factor(p, grid)
        z = _normals(seed, n_paths, grid.size - 1, first)
        values[:, 1:] = z @ factor.T
    else:
        m, h = riemann_matrix(p, grid, refinement)
        dw = _normals(seed, n_paths, h.size, first) * np.sqrt(h)
        values[:, 1:] = dw @ m.T
    meta = {"params": list(p.as_tuple()), "refinement": refinement, "first_stream": first}
    return PathBatch(grid=grid.copy(), values=values, seed=int(seed), method=method, meta=meta)


def simulate_x(p, grid, seed: int, method: str = "cholesky", *, refinement: int = DEFAULT_REFINEMENT) -> GridPath:
    """One path of ``X`` on ``grid`` (stream 0 of ``seed``)."""
    return simulate_paths(p, grid, seed, 1, method, refinement=refinement).path(0)


def ou_coefficients(grid, theta: float, scheme: str = "exact"):
    """``(growth, drive)`` with ``Z_(j+1) = growth_j Z_j + drive_j (X_(j+1) - X_j)``.

    ``exact`` solves the Langevin equation for the piecewise-linear
    interpolant of ``X``; ``euler`` is the explicit Euler step.
    """
    h = np.diff(np.asarray(grid, dtype=float))
    if Scheme(scheme) is Scheme.EULER:
        return 1.0 + theta * h, np.ones_like(h)
    th = theta * h
    return np.exp(th), core._phi1(th)


def ou_from_x(x, grid, theta: float, scheme: str = "exact") -> np.ndarray:
    """OU values driven by the rows of ``x``."""
    growth, drive = ou_coefficients(grid, theta, scheme)
    return core.linear_recurrence(x, growth, drive)


def simulate_z(
    m: OUModel, grid, seed: int, method: str = "cholesky", *, scheme: str = "exact", refinement: int = DEFAULT_REFINEMENT
) -> tuple[GridPath, GridPath]:
    """One path of ``X`` and the OU process ``Z_t = theta int_0^t Z ds + X_t``."""
    x = simulate_x(m.params, grid, seed, method, refinement=refinement)
    z = ou_from_x(x.values, x.grid, m.theta, scheme)[0]
    return x, GridPath(x.grid, z, x.seed, x.method)


def ou_variation_of_constants(x: GridPath, theta: float) -> np.ndarray:
    """``Z_t = X_t + theta int_0^t e^(theta (t-s)) X_s ds`` by trapezoid sums.

    An independent route to ``Z`` through integration by parts in
    ``Z_t = e^(theta t) int_0^t e^(-theta s) dX_s``.
    """
    t, v = x.grid, x.values
    g = np.exp(-theta * t) * v
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
    return v + theta * np.exp(theta * t) * cum


def stieltjes_exp_integral(path: GridPath, theta: float, sign: int, T: float, *, rule: str = "trapezoid") -> float:
    """``int_0^T e^(sign theta s) dX_s``.

    ``trapezoid`` uses integration by parts,
    ``e^(sign theta T) X_T - sign theta int_0^T e^(sign theta s) X_s ds``,
    with the trapezoid rule.  ``exact`` integrates the piecewise-linear
    interpolant of the path exactly.
    """
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    k = path.index_of(T)
    t, v = path.grid[: k + 1], path.values[: k + 1]
    a = sign * theta
    if rule == "exact":
        h = np.diff(t)
        return float(np.sum(np.diff(v) * np.exp(a * t[:-1]) * core._phi1(a * h)))
    if rule != "trapezoid":
        raise DomainError(f"unknown rule {rule!r}")
    g = np.exp(a * t) * v
    return float(np.exp(a * T) * v[-1] - a * np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(t)))


def increment_sup_ratio(path: GridPath, exponent: float) -> float:
    """``max_j |X_(j+1) - X_j| / h_j^exponent`` (Hoelder diagnostic)."""
    h = np.diff(path.grid)
    return float(np.max(np.abs(np.diff(path.values)) / h**exponent))


# ---------------------------------------------------------------------------
# binary container


def write_paths(path, batch: PathBatch, *, theta: float | None = None) -> None:
    """Write a batch as magic, header length, JSON header, float64 data."""
    header = {
        "params": batch.meta.get("params"),
        "theta": theta,
        "seed": batch.seed,
        "method": batch.method,
        "n_paths": len(batch),
        "n_points": int(batch.grid.size),
        "grid": {"t_min": float(batch.grid[0]), "t_max": float(batch.grid[-1])},
        "meta": batch.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.uint64(len(blob)).tobytes())
        fh.write(blob)
        fh.write(batch.grid.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(batch.values, dtype="<f8").tobytes())


def read_paths(path) -> tuple[PathBatch, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise DomainError("not a path container")
        n = int(np.frombuffer(fh.read(8), dtype=np.uint64)[0])
        header = json.loads(fh.read(n).decode())
        npts, npath = header["n_points"], header["n_paths"]
        grid = np.frombuffer(fh.read(8 * npts), dtype="<f8").copy()
        values = np.frombuffer(fh.read(8 * npts * npath), dtype="<f8").reshape(npath, npts).copy()
    batch = PathBatch(grid=grid, values=values, seed=header["seed"], method=header["method"], meta=header["meta"])
    return batch, header


__all__ = [
    "GridPath",
    "Method",
    "OUModel",
    "PathBatch",
    "Scheme",
    "check_grid",
    "cholesky_factor",
    "geometric_grid",
    "increment_sup_ratio",
    "ou_coefficients",
    "ou_from_x",
    "ou_variation_of_constants",
    "read_paths",
    "riemann_covariance",
    "riemann_matrix",
    "simulate_paths",
    "simulate_x",
    "simulate_z",
    "stieltjes_exp_integral",
    "stream",
    "uniform_grid",
    "write_paths",
]
