"""Validated variable-exponent fields p(x,y), q(x) with sampled bounds.

The admissibility conditions are checked by dense sampling over the closed
domain: 1 < p everywhere, symmetry p(x,y) = p(y,x) up to 1e-12, and
s*p(x,y) < N.  Sampling (rather than symbolic analysis) is sound here
because the bounds only enter the estimates as constants and the exponents
are continuous.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetricExponentError,
    ExponentOutOfRangeError,
    OrderTooLargeError,
)
from .expressions import Expression, parse_expression
from .meshing import Domain

__all__ = ["ExponentField", "TraceRegimeWarning", "build_exponent_field"]

SYMMETRY_TOL = 1e-12

#: cap on sample pairs processed per vectorized chunk
_CHUNK = 1 << 18


class TraceRegimeWarning(UserWarning):
    """Emitted when s*p_minus <= 1, outside the regime where the boundary
    trace is classically well defined.  Non-fatal: the discrete problem is
    still well posed."""


@dataclass(frozen=True)
class ExponentField:
    """Symmetric pairwise exponent p, boundary exponent q, order s, and the
    bounds sampled over the closed domain."""

    p: Expression
    q: Expression
    s: float
    domain: Domain
    p_minus: float
    p_plus: float
    q_minus: float
    q_plus: float
    sample_grid_resolution: int
    warnings: tuple = ()

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def p_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Evaluate p at coordinate arrays of shape (n, N)."""
        env = _pair_env(self.dimension, x, y)
        return np.asarray(self.p.evaluate(env), dtype=float)

    def q_at(self, x: np.ndarray) -> np.ndarray:
        env = _point_env(self.dimension, x)
        return np.broadcast_to(
            np.asarray(self.q.evaluate(env), dtype=float), (np.shape(x)[0],)
        ).copy()


def _point_env(dim: int, x: np.ndarray) -> dict:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if dim == 1:
        return {"x": x[:, 0]}
    return {"x1": x[:, 0], "x2": x[:, 1]}


def _pair_env(dim: int, x: np.ndarray, y: np.ndarray) -> dict:
    env = _point_env(dim, x)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if dim == 1:
        env["y"] = y[:, 0]
    else:
        env["y1"] = y[:, 0]
        env["y2"] = y[:, 1]
    return env


def _closure_grid(domain: Domain, grid: int) -> np.ndarray:
    """(m, N) sample points covering the closed domain, grid per axis."""
    axes = [np.linspace(a, b, grid) for a, b in domain.extent]
    if domain.dimension == 1:
        return axes[0][:, None]
    gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _swap_map(dim: int) -> dict:
    return {"x": "y", "y": "x"} if dim == 1 else {
        "x1": "y1", "y1": "x1", "x2": "y2", "y2": "x2"
    }


def _diag_map(dim: int) -> dict:
    return {"y": "x"} if dim == 1 else {"y1": "x1", "y2": "x2"}


def build_exponent_field(
    p_src: str,
    q_src: str | None,
    s: float,
    domain: Domain,
    grid: int = 64,
) -> ExponentField:
    """Parse, sample and validate an exponent field.

    p_src is a pairwise expression, q_src a pointwise one (defaults to the
    diagonal trace p(x,x)).  Raises AsymmetricExponentError,
    ExponentOutOfRangeError or OrderTooLargeError on an inadmissible field;
    emits TraceRegimeWarning (also recorded on the field) when
    s*p_minus <= 1.
    """
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    grid = int(grid)
    if grid < 8:
        raise ValueError(f"sample grid must be at least 8 per axis, got {grid}")
    dim = domain.dimension

    p = parse_expression(p_src, dim, "pairwise")
    p_swapped = p.substitute(_swap_map(dim))
    if q_src is None:
        q = p.substitute(_diag_map(dim), role="pointwise")
    else:
        q = parse_expression(q_src, dim, "pointwise")

    points = _closure_grid(domain, grid)
    m = points.shape[0]

    p_min, p_max, sym_defect = np.inf, -np.inf, 0.0
    # all ordered pairs of sample points, processed in chunks
    rows_per_chunk = max(1, _CHUNK // m)
    for start in range(0, m, rows_per_chunk):
        xs = np.repeat(points[start:start + rows_per_chunk], m, axis=0)
        ys = np.tile(points, (xs.shape[0] // m, 1))
        env = _pair_env(dim, xs, ys)
        vals = np.broadcast_to(
            np.asarray(p.evaluate(env), dtype=float), (xs.shape[0],)
        )
        if not np.all(np.isfinite(vals)):
            raise ExponentOutOfRangeError("p(x,y) is not finite on the sample grid")
        swapped = np.broadcast_to(
            np.asarray(p_swapped.evaluate(env), dtype=float), (xs.shape[0],)
        )
        sym_defect = max(sym_defect, float(np.max(np.abs(vals - swapped))))
        p_min = min(p_min, float(np.min(vals)))
        p_max = max(p_max, float(np.max(vals)))

    if sym_defect > SYMMETRY_TOL:
        raise AsymmetricExponentError(
            f"p(x,y) and p(y,x) differ by up to {sym_defect:.3e} "
            f"(tolerance {SYMMETRY_TOL:.0e}) on the sample grid"
        )
    if p_min <= 1.0:
        raise ExponentOutOfRangeError(
            f"p must exceed 1 everywhere; sampled minimum {p_min}"
        )
    if s * p_max >= dim:
        raise OrderTooLargeError(
            f"s*p must stay below the dimension N={dim}; "
            f"sampled maximum s*p = {s * p_max}"
        )

    q_vals = np.broadcast_to(
        np.asarray(q.evaluate(_point_env(dim, points)), dtype=float), (m,)
    )
    if not np.all(np.isfinite(q_vals)):
        raise ExponentOutOfRangeError("q(x) is not finite on the sample grid")
    q_min = float(np.min(q_vals))
    q_max = float(np.max(q_vals))
    if q_min <= 1.0:
        raise ExponentOutOfRangeError(
            f"q must exceed 1 everywhere; sampled minimum {q_min}"
        )

    notes = []
    if s * p_min <= 1.0:
        msg = (
            f"s*p_minus = {s * p_min:.6g} <= 1: outside the trace regime, "
            "boundary values enter only through the discrete constraint"
        )
        notes.append(msg)
        warnings.warn(msg, TraceRegimeWarning, stacklevel=2)

    return ExponentField(
        p=p,
        q=q,
        s=s,
        domain=domain,
        p_minus=p_min,
        p_plus=p_max,
        q_minus=q_min,
        q_plus=q_max,
        sample_grid_resolution=grid,
        warnings=tuple(notes),
    )
