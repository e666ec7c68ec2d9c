"""Symmetric pairwise kernel weights approximating dxdy/|x-y|^(N+s*p(x,y)).

Weights are computed once per unordered pair and mirrored, so the matrices
are bitwise symmetric.  Exponents are frozen at the node pair (and averaged
with the swapped evaluation, making them bitwise symmetric as well), which
keeps each pair integrand a pure power law.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedKernelError, KernelFormatError
from .exponents import ExponentField
from .meshing import Mesh
from .quadrature import batch_pair_weights

__all__ = ["Kernel", "assemble_kernel", "save_kernel", "load_kernel"]


@dataclass(frozen=True)
class Kernel:
    """Assembled pairwise weights w_ij with per-pair exponents p_ij.

    weights and exponents are (n, n) symmetric with zero diagonal; accuracy
    holds the estimated relative quadrature error per pair (zeros when the
    kernel was loaded from a file).
    """

    weights: np.ndarray
    exponents: np.ndarray
    s: float
    masses: np.ndarray
    accuracy: np.ndarray = None
    mesh: Mesh = field(default=None, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        p = np.array(self.exponents, dtype=float, copy=True)
        m = np.array(self.masses, dtype=float, copy=True)
        n = m.size
        if w.shape != (n, n) or p.shape != (n, n):
            raise ValueError("weights/exponents must be square and match masses")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("weight diagonal must be exactly zero")
        if not np.array_equal(w, w.T) or not np.array_equal(p, p.T):
            raise ValueError("weights and exponents must be exactly symmetric")
        off = ~np.eye(n, dtype=bool)
        if np.any(p[off] <= 1.0):
            raise ValueError("pair exponents must exceed 1")
        acc = self.accuracy
        acc = np.zeros((n, n)) if acc is None else np.array(acc, dtype=float, copy=True)
        for arr in (w, p, m, acc):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "exponents", p)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "accuracy", acc)

    @property
    def n_nodes(self) -> int:
        return self.masses.size

    def p_bounds(self) -> tuple[float, float]:
        """Range of the off-diagonal pair exponents."""
        off = ~np.eye(self.n_nodes, dtype=bool)
        return float(self.exponents[off].min()), float(self.exponents[off].max())

    def require_connected(self):
        """Raise DisconnectedKernelError unless the w > 0 graph is connected."""
        n = self.n_nodes
        adj = self.weights > 0
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = np.array([0])
        while frontier.size:
            nxt = np.any(adj[frontier], axis=0) & ~seen
            seen |= nxt
            frontier = np.flatnonzero(nxt)
        if not np.all(seen):
            raise DisconnectedKernelError(
                f"kernel graph has {int(np.sum(~seen))} unreachable node(s)"
            )


def assemble_kernel(mesh: Mesh, field: ExponentField, rel_tol: float) -> Kernel:
    """Assemble the kernel of a mesh under a validated exponent field.

    Each unordered pair (i, j) gets p_ij = (p(x_i,x_j) + p(x_j,x_i)) / 2 and
    w_ij = pair_weight at exponent N + s*p_ij with the given quadrature
    tolerance.  Raises BudgetExceededError from the quadrature or
    DisconnectedKernelError if any weight pattern came out disconnected.
    """
    n = mesh.n_nodes
    ii, jj = np.triu_indices(n, k=1)
    xi = mesh.nodes[ii]
    xj = mesh.nodes[jj]
    p_fwd = field.p_at(xi, xj)
    p_bwd = field.p_at(xj, xi)
    p_pairs = 0.5 * (p_fwd + p_bwd)
    alpha = mesh.dimension + field.s * p_pairs

    vals, errs = batch_pair_weights(
        mesh.cell_lower[ii], mesh.cell_upper[ii],
        mesh.cell_lower[jj], mesh.cell_upper[jj],
        alpha, rel_tol, full_output=True,
    )

    weights = np.zeros((n, n))
    weights[ii, jj] = vals
    weights[jj, ii] = vals
    exps = np.zeros((n, n))
    exps[ii, jj] = p_pairs
    exps[jj, ii] = p_pairs
    np.fill_diagonal(exps, field.p_at(mesh.nodes, mesh.nodes))
    acc = np.zeros((n, n))
    rel = errs / np.where(vals > 0, vals, 1.0)
    acc[ii, jj] = rel
    acc[jj, ii] = rel

    kernel = Kernel(weights, exps, field.s, mesh.masses, acc, mesh)
    kernel.require_connected()
    return kernel


# --------------------------------------------------------------------------
# Text format: header, `i j w_ij p_ij` rows for i < j, then a masses block.
# Values are written with 17 significant digits, which round-trips float64.
# --------------------------------------------------------------------------

_HEADER_PREFIX = "fracplap-kernel v1 N="


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_kernel(kernel: Kernel, path_or_file) -> None:
    """Write the kernel in the plain-text pair format."""
    if hasattr(path_or_file, "write"):
        _write_kernel(kernel, path_or_file)
    else:
        with open(path_or_file, "w") as fh:
            _write_kernel(kernel, fh)


def _write_kernel(kernel: Kernel, fh) -> None:
    n = kernel.n_nodes
    fh.write(f"{_HEADER_PREFIX}{n}\n")
    ii, jj = np.triu_indices(n, k=1)
    w = kernel.weights
    p = kernel.exponents
    for i, j in zip(ii, jj):
        fh.write(f"{i} {j} {_fmt(w[i, j])} {_fmt(p[i, j])}\n")
    fh.write("masses\n")
    fh.write(" ".join(_fmt(m) for m in kernel.masses) + "\n")


def load_kernel(path_or_file, s: float = float("nan"), mesh: Mesh = None) -> Kernel:
    """Read a kernel written by save_kernel.

    The text format does not carry the order s or the accuracy record; pass
    s explicitly if downstream code needs it.
    """
    if hasattr(path_or_file, "read"):
        return _read_kernel(path_or_file, s, mesh)
    with open(path_or_file) as fh:
        return _read_kernel(fh, s, mesh)


def _read_kernel(fh, s, mesh) -> Kernel:
    header = fh.readline().strip()
    if not header.startswith(_HEADER_PREFIX):
        raise KernelFormatError(f"bad header line: {header!r}")
    try:
        n = int(header[len(_HEADER_PREFIX):])
    except ValueError:
        raise KernelFormatError(f"bad node count in header: {header!r}")
    weights = np.zeros((n, n))
    exps = np.zeros((n, n))
    np.fill_diagonal(exps, 2.0)
    seen_masses = False
    masses = None
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line == "masses":
            seen_masses = True
            continue
        if seen_masses:
            masses = np.array([float(v) for v in line.split()])
            break
        parts = line.split()
        if len(parts) != 4:
            raise KernelFormatError(f"bad pair row: {line!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < j < n):
            raise KernelFormatError(f"pair indices out of range: {line!r}")
        w, p = float(parts[2]), float(parts[3])
        weights[i, j] = weights[j, i] = w
        exps[i, j] = exps[j, i] = p
    if masses is None or masses.size != n:
        raise KernelFormatError("missing or malformed masses block")
    off = ~np.eye(n, dtype=bool)
    np.fill_diagonal(exps, 0.5 * (exps[off].min() + exps[off].max()))
    return Kernel(weights, exps, float(s), masses, None, mesh)
