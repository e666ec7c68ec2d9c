"""Uniform cell meshes of intervals and axis-aligned rectangles.

Nodes sit at cell centers, node masses are cell volumes, and a cell is
boundary-flagged when it touches the domain boundary.  These meshes carry
the discrete analogues of the Lebesgue measure (sums of masses) used
throughout the diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshMismatchError

__all__ = ["Domain", "Mesh", "DiscreteFunction", "build_mesh"]


@dataclass(frozen=True)
class Domain:
    """Bounded box domain: an interval (N=1) or a rectangle (N=2)."""

    dimension: int
    extent: tuple  # ((a, b),) in 1D, ((a1, b1), (a2, b2)) in 2D

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        ext = tuple(tuple(float(v) for v in ab) for ab in self.extent)
        if len(ext) != self.dimension:
            raise ValueError("extent must give one (lo, hi) pair per axis")
        for a, b in ext:
            if not (np.isfinite(a) and np.isfinite(b) and b > a):
                raise ValueError(f"degenerate axis extent ({a}, {b})")
        object.__setattr__(self, "extent", ext)

    @property
    def volume(self) -> float:
        out = 1.0
        for a, b in self.extent:
            out *= b - a
        return out


@dataclass(frozen=True)
class Mesh:
    """Uniform partition of a Domain into axis-aligned cells."""

    domain: Domain
    resolution: tuple
    nodes: np.ndarray          # (n, N) cell centers
    cell_lower: np.ndarray     # (n, N)
    cell_upper: np.ndarray     # (n, N)
    masses: np.ndarray         # (n,)
    boundary: np.ndarray       # (n,) bool
    grid_index: np.ndarray = field(repr=False, default=None)  # (n, N) int

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    def cell(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corner of cell i."""
        return self.cell_lower[i], self.cell_upper[i]

    def collar(self, depth: int = 1) -> np.ndarray:
        """Mask of cells within `depth` cells of the boundary (inclusive)."""
        idx = self.grid_index
        res = np.asarray(self.resolution)
        near = np.zeros(self.n_nodes, dtype=bool)
        for ax in range(self.dimension):
            near |= idx[:, ax] <= depth
            near |= idx[:, ax] >= res[ax] - 1 - depth
        return near

    def coords_env(self, pairwise_with: np.ndarray | None = None) -> dict:
        """Variable environment for expression evaluation at the nodes.

        With ``pairwise_with`` given (another (n, N) coordinate array),
        returns the pairwise environment (x/y or x1,x2/y1,y2).
        """
        env = {}
        names_x = ("x",) if self.dimension == 1 else ("x1", "x2")
        for ax, name in enumerate(names_x):
            env[name] = self.nodes[:, ax]
        if pairwise_with is not None:
            names_y = ("y",) if self.dimension == 1 else ("y1", "y2")
            for ax, name in enumerate(names_y):
                env[name] = pairwise_with[:, ax]
        return env

    def same_as(self, other: "Mesh") -> bool:
        if self is other:
            return True
        return (
            self.dimension == other.dimension
            and self.resolution == other.resolution
            and np.array_equal(self.nodes, other.nodes)
        )


def _require_same_mesh(a: Mesh, b: Mesh, what: str):
    if not a.same_as(b):
        raise MeshMismatchError(f"{what} live on different meshes")


def build_mesh(domain: Domain, resolution) -> Mesh:
    """Partition the domain uniformly.

    resolution is an integer (used for every axis) or a per-axis tuple;
    every entry must be >= 2.
    """
    if np.isscalar(resolution):
        res = (int(resolution),) * domain.dimension
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != domain.dimension:
        raise ValueError("resolution must give one entry per axis")
    if any(r < 2 for r in res):
        raise ValueError("resolution must be at least 2 per axis")

    axes_lo, axes_hi, axes_mid = [], [], []
    for (a, b), r in zip(domain.extent, res):
        edges = np.linspace(a, b, r + 1)
        axes_lo.append(edges[:-1])
        axes_hi.append(edges[1:])
        axes_mid.append(0.5 * (edges[:-1] + edges[1:]))

    if domain.dimension == 1:
        nodes = axes_mid[0][:, None]
        lower = axes_lo[0][:, None]
        upper = axes_hi[0][:, None]
        gidx = np.arange(res[0])[:, None]
    else:
        ix, iy = np.meshgrid(np.arange(res[0]), np.arange(res[1]), indexing="ij")
        gidx = np.column_stack([ix.ravel(), iy.ravel()])
        nodes = np.column_stack([axes_mid[0][gidx[:, 0]], axes_mid[1][gidx[:, 1]]])
        lower = np.column_stack([axes_lo[0][gidx[:, 0]], axes_lo[1][gidx[:, 1]]])
        upper = np.column_stack([axes_hi[0][gidx[:, 0]], axes_hi[1][gidx[:, 1]]])

    masses = np.prod(upper - lower, axis=1)
    resarr = np.asarray(res)
    boundary = np.zeros(nodes.shape[0], dtype=bool)
    for ax in range(domain.dimension):
        boundary |= (gidx[:, ax] == 0) | (gidx[:, ax] == resarr[ax] - 1)

    for arr in (nodes, lower, upper, masses, boundary, gidx):
        arr.setflags(write=False)
    return Mesh(domain, res, nodes, lower, upper, masses, boundary, gidx)


@dataclass(frozen=True)
class DiscreteFunction:
    """Node-value array on a mesh; optionally constrained to vanish on the
    boundary-flagged nodes (the discrete Dirichlet condition)."""

    values: np.ndarray
    mesh: Mesh
    boundary_zero: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"expected {self.mesh.n_nodes} node values, got shape {vals.shape}"
            )
        if self.boundary_zero and np.any(vals[self.mesh.boundary] != 0.0):
            raise ValueError("boundary_zero function has nonzero boundary values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "DiscreteFunction":
        return DiscreteFunction(values, self.mesh, self.boundary_zero)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def function_from_expression(expr, mesh: Mesh, boundary_zero: bool = False) -> DiscreteFunction:
    """Sample a pointwise expression at the mesh nodes."""
    vals = np.broadcast_to(
        np.asarray(expr.evaluate(mesh.coords_env()), dtype=float), (mesh.n_nodes,)
    ).copy()
    if boundary_zero:
        vals[mesh.boundary] = 0.0
    return DiscreteFunction(vals, mesh, boundary_zero)
