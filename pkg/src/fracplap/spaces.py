"""Variable-exponent modulars and Luxemburg norms on discrete functions.

The seminorm modular is the double sum over ordered node pairs

    rho_s(u) = sum_{i != j} w_ij |u_i - u_j|^{p_ij},

mirroring integration over Omega x Omega, and the full modular adds the
variable-exponent Lebesgue term sum_i m_i |u_i|^{q(x_i)}.  The Luxemburg
norm of a modular rho is inf{ lam > 0 : rho(u/lam) <= 1 }, computed by
monotone bisection in lam (rho(u/lam) is continuous and strictly
decreasing wherever finite and positive).

Summations use numpy's fixed-order pairwise reduction, so repeated
evaluations are bitwise identical.
"""

from __future__ import annotations

import numpy as np

from .errors import MeshMismatchError, NonConvergenceError
from .exponents import ExponentField
from .kernel import Kernel
from .meshing import DiscreteFunction

__all__ = [
    "seminorm_modular",
    "lebesgue_modular",
    "full_modular",
    "luxemburg_norm",
]

#: default tolerance on |rho(u/lam) - 1|
DEFAULT_TOL = 1e-10

#: bracket expansion budget (doublings) before giving up
MAX_BRACKET_DOUBLINGS = 200


def _check_kernel_mesh(kernel: Kernel, u: DiscreteFunction):
    if kernel.n_nodes != u.values.size:
        raise MeshMismatchError(
            f"kernel has {kernel.n_nodes} nodes, function has {u.values.size}"
        )
    if kernel.mesh is not None and not kernel.mesh.same_as(u.mesh):
        raise MeshMismatchError("kernel and function live on different meshes")


def seminorm_modular(kernel: Kernel, u: DiscreteFunction) -> float:
    """Gagliardo-type modular: sum over ordered pairs of w_ij |u_i-u_j|^p_ij."""
    _check_kernel_mesh(kernel, u)
    d = np.abs(u.values[:, None] - u.values[None, :])
    terms = kernel.weights * d ** kernel.exponents
    np.fill_diagonal(terms, 0.0)
    return 2.0 * float(np.sum(np.triu(terms, k=1)))


def lebesgue_modular(field: ExponentField, u: DiscreteFunction,
                     masses: np.ndarray = None) -> float:
    """Variable-exponent Lebesgue modular: sum_i m_i |u_i|^{q(x_i)}.

    masses default to the mesh masses (pass kernel masses to stay
    consistent with a hand-built kernel).
    """
    q = field.q_at(u.mesh.nodes)
    m = u.mesh.masses if masses is None else masses
    return float(np.sum(m * np.abs(u.values) ** q))


def full_modular(kernel: Kernel, field: ExponentField, u: DiscreteFunction) -> float:
    """Seminorm modular plus the Lebesgue term (the space's full modular)."""
    return seminorm_modular(kernel, u) + lebesgue_modular(field, u, kernel.masses)


def _modular_and_bounds(kind, kernel, field, u):
    if kind == "seminorm":
        if kernel is None:
            raise ValueError("seminorm norm needs a kernel")
        lo, hi = kernel.p_bounds()
        return (lambda v: seminorm_modular(kernel, v)), lo, hi
    if kind == "lebesgue":
        if field is None:
            raise ValueError("lebesgue norm needs an exponent field")
        masses = kernel.masses if kernel is not None else None
        return (
            (lambda v: lebesgue_modular(field, v, masses)),
            field.q_minus,
            field.q_plus,
        )
    if kind == "full":
        if kernel is None or field is None:
            raise ValueError("full norm needs both kernel and exponent field")
        lo, hi = kernel.p_bounds()
        return (
            (lambda v: full_modular(kernel, field, v)),
            min(lo, field.q_minus),
            max(hi, field.q_plus),
        )
    raise ValueError(f"unknown modular kind {kind!r}")


def luxemburg_norm(
    kind: str,
    u: DiscreteFunction,
    kernel: Kernel = None,
    field: ExponentField = None,
    tol: float = DEFAULT_TOL,
    full_output: bool = False,
):
    """Luxemburg norm of a discrete function for one of the modulars.

    Parameters
    ----------
    kind : "seminorm" | "lebesgue" | "full"
        Which modular defines the norm; kernel and/or field must be passed
        accordingly.
    tol : float
        Acceptance tolerance on the modular residual |rho(u/lam) - 1|.

    Returns the norm value (and with ``full_output`` the achieved modular
    residual).  A vanishing modular maps to norm 0 by the infimum
    convention.  Raises NonConvergenceError if bracket expansion exceeds
    its budget.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho, p_lo, p_hi = _modular_and_bounds(kind, kernel, field, u)

    rho_u = rho(u)
    if rho_u == 0.0:
        return (0.0, 0.0) if full_output else 0.0
    if not np.isfinite(rho_u):
        raise NonConvergenceError("modular of the function is not finite")

    scale = max(rho_u ** (1.0 / p_lo), 1e-300)
    lam_lo = 1e-3 * scale   # rho(u/lam_lo) should exceed 1
    lam_hi = 1e3 * scale    # rho(u/lam_hi) should be below 1

    def residual(lam):
        return rho(u.with_values(u.values / lam)) - 1.0

    r_lo = residual(lam_lo)
    doublings = 0
    while r_lo < 0.0:
        lam_lo *= 0.5
        r_lo = residual(lam_lo)
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise NonConvergenceError("bracket expansion failed at the lower end")
    r_hi = residual(lam_hi)
    doublings = 0
    while r_hi > 0.0:
        lam_hi *= 2.0
        r_hi = residual(lam_hi)
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise NonConvergenceError("bracket expansion failed at the upper end")

    if abs(r_lo) <= tol:
        out, res = lam_lo, r_lo
    elif abs(r_hi) <= tol:
        out, res = lam_hi, r_hi
    else:
        out, res = None, None
        for _ in range(20000):
            mid = 0.5 * (lam_lo + lam_hi)
            r_mid = residual(mid)
            if abs(r_mid) <= tol:
                out, res = mid, r_mid
                break
            if r_mid > 0.0:
                lam_lo = mid
            else:
                lam_hi = mid
            if (lam_hi - lam_lo) <= 1e-17 * lam_hi:
                # bracket collapsed to rounding width; take the midpoint
                out, res = mid, r_mid
                break
        if out is None:
            raise NonConvergenceError("bisection failed to meet the tolerance")

    return (out, abs(res)) if full_output else out
