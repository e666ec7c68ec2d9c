"""Truncation and cutoff calculus: T_k, G_h, S_sigma and the R_h predicate.

All four are exact closed forms, vectorized over numpy arrays, and lift to
DiscreteFunctions pointwise.  Branch boundaries use <= on the inner region,
so T_k(k) = k exactly.
"""

from __future__ import annotations

import numpy as np

from .meshing import DiscreteFunction

__all__ = ["truncate", "tail_part", "smooth_cutoff", "in_Rh"]


def _lift(func, u, *args):
    if isinstance(u, DiscreteFunction):
        return u.with_values(func(u.values, *args))
    return func(np.asarray(u, dtype=float), *args) if np.ndim(u) else func(u, *args)


def truncate(k: float, t):
    """T_k(t) = max(-k, min(k, t)): clamp to [-k, k].

    Accepts scalars, arrays or DiscreteFunctions (applied pointwise).
    """
    if k <= 0:
        raise ValueError("truncation level k must be positive")
    if isinstance(t, DiscreteFunction):
        return t.with_values(np.clip(t.values, -k, k))
    out = np.clip(t, -k, k)
    return float(out) if np.ndim(out) == 0 else out


def tail_part(h: float, t):
    """G_h(t) = t - T_h(t): the part of t above level h.

    The identity G_h(t) + T_h(t) == t holds bitwise: the naive difference
    is corrected by at most one ulp where the two roundings (subtraction,
    re-addition) would otherwise disagree.
    """
    if h <= 0:
        raise ValueError("tail level h must be positive")
    if isinstance(t, DiscreteFunction):
        return t.with_values(_tail_values(t.values, h))
    out = _tail_values(np.asarray(t, dtype=float), h)
    return float(out) if np.ndim(out) == 0 else out


def _tail_values(t, h):
    shape = np.shape(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    trunc = np.clip(t, -h, h)
    g = t - trunc
    # nudge g toward the exact difference until g + trunc reconstructs t
    for _ in range(3):
        bad = (g + trunc) != t
        if not np.any(bad):
            break
        target = np.where(g + trunc < t, np.inf, -np.inf)
        g = np.where(bad, np.nextafter(g, target), g)
    return g.reshape(shape)


def smooth_cutoff(sigma: float, r):
    """The 1-Lipschitz cutoff S_sigma and its derivative.

    S_sigma is the identity on [-sigma, sigma], tapers quadratically on
    sigma <= |r| <= sigma+1 and is constant +-(sigma + 1/2) beyond; its
    derivative is sigma + 1 - |r| on the taper band and has support exactly
    [-sigma-1, sigma+1].  Returns (value, derivative).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if isinstance(r, DiscreteFunction):
        v, d = _cutoff_values(r.values, sigma)
        return r.with_values(v), r.with_values(d)
    v, d = _cutoff_values(np.asarray(r, dtype=float), sigma)
    if np.ndim(r) == 0:
        return float(v), float(d)
    return v, d


def _cutoff_values(r, sigma):
    a = np.abs(r)
    sgn = np.sign(r)
    value = np.where(
        a < sigma,
        r,
        np.where(
            a <= sigma + 1.0,
            sgn * ((sigma + 0.5) - 0.5 * (a - (sigma + 1.0)) ** 2),
            sgn * (sigma + 0.5),
        ),
    )
    deriv = np.where(
        a < sigma,
        1.0,
        np.where(a <= sigma + 1.0, sigma + 1.0 - a, 0.0),
    )
    return value, deriv


def in_Rh(h: float, v, w):
    """Membership in R_h: the pair region where the energy tail lives.

    (v, w) is in R_h iff max(|v|, |w|) >= h+1 and (min(|v|, |w|) <= h or
    v*w < 0).  Symmetric in (v, w); ties v*w == 0 fall to the min branch.
    """
    if h <= 0:
        raise ValueError("level h must be positive")
    av = np.abs(v)
    aw = np.abs(w)
    out = (np.maximum(av, aw) >= h + 1.0) & (
        (np.minimum(av, aw) <= h) | (np.asarray(v) * np.asarray(w) < 0)
    )
    return bool(out) if np.ndim(out) == 0 else out
