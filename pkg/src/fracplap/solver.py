"""Discrete energy, its gradient, and the convex minimization driver.

The energy of a boundary-zero function u is

    F(u) = sum_{i != j} w_ij |u_i - u_j|^{p_ij} / p_ij - sum_i m_i f_i u_i

(ordered pairs, hence the factor 2 in the gradient).  The 1/p(x,y) factor
is kept so that the critical point satisfies the weak form

    sum_{i,j} w_ij |u_i-u_j|^{p_ij-2}(u_i-u_j)(v_i-v_j) = sum_i m_i f_i v_i

for all boundary-zero v, exactly.

For p < 2 the gradient of |t|^p is continuous but not differentiable at 0,
so minimization runs a smoothing continuation |t|^p -> (t^2+eps^2)^(p/2) -
eps^p with eps shrinking by 4 per stage and a final unsmoothed polish.
Each stage is solved by L-BFGS-B (a descent method with line search, so
stage energies decrease monotonically); everything is deterministic given
(problem, u0, options).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import MeshMismatchError, MonotonicityViolationError
from .exponents import ExponentField
from .kernel import Kernel
from .meshing import DiscreteFunction
from .truncation import truncate

__all__ = ["Problem", "Solution", "energy", "energy_gradient", "minimize",
           "approx_sequence"]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 5000


@dataclass(frozen=True)
class Problem:
    """Dirichlet problem data: kernel, exponent field and nonnegative f."""

    kernel: Kernel
    field: ExponentField
    f: DiscreteFunction

    def __post_init__(self):
        if self.kernel.mesh is None:
            raise ValueError("problem kernel must carry its mesh")
        if not self.kernel.mesh.same_as(self.f.mesh):
            raise MeshMismatchError("data and kernel live on different meshes")
        if np.any(self.f.values < 0):
            raise ValueError("data f must be nonnegative")

    @property
    def mesh(self):
        return self.kernel.mesh

    def with_data(self, f: DiscreteFunction) -> "Problem":
        return Problem(self.kernel, self.field, f)

    def residual_scale(self) -> float:
        """1 + max_i m_i f_i: the scale the weak residual is measured against."""
        return 1.0 + float(np.max(self.kernel.masses * self.f.values))


@dataclass(frozen=True)
class Solution:
    """Minimizer with residual metadata."""

    u: DiscreteFunction
    truncation_level: float
    weak_residual: float
    iterations: int
    energy_value: float
    smoothing_final: float
    converged: bool
    gradient: np.ndarray = dc_field(repr=False, default=None)

    def residual_sum(self) -> float:
        """Sum over interior nodes of |gradient|, the slack currency used by
        every diagnostic pairing bound."""
        return float(np.sum(np.abs(self.gradient[self.u.mesh.interior])))


def _pair_arrays(problem: Problem):
    w = problem.kernel.weights
    p = problem.kernel.exponents
    return w, p


def energy(problem: Problem, u: DiscreteFunction, smoothing: float = 0.0) -> float:
    """Convex energy whose critical point is the weak solution."""
    _check_membership(problem, u)
    w, p = _pair_arrays(problem)
    d = np.abs(u.values[:, None] - u.values[None, :])
    if smoothing > 0.0:
        pair = w * ((d * d + smoothing * smoothing) ** (0.5 * p)
                    - smoothing ** p) / p
    else:
        pair = w * d ** p / p
    np.fill_diagonal(pair, 0.0)
    pair_sum = 2.0 * float(np.sum(np.triu(pair, k=1)))
    load = float(np.sum(problem.kernel.masses * problem.f.values * u.values))
    return pair_sum - load


def energy_gradient(problem: Problem, u: DiscreteFunction,
                    smoothing: float = 0.0) -> DiscreteFunction:
    """Gradient of the energy; component k is
    2 sum_j w_kj |u_k-u_j|^{p_kj-2}(u_k-u_j) - m_k f_k.

    Boundary components are reported but play no role in optimality.
    """
    _check_membership(problem, u)
    w, p = _pair_arrays(problem)
    d = u.values[:, None] - u.values[None, :]
    if smoothing > 0.0:
        psi = d * (d * d + smoothing * smoothing) ** (0.5 * (p - 2.0))
    else:
        psi = np.sign(d) * np.abs(d) ** (p - 1.0)
    np.fill_diagonal(psi, 0.0)
    g = 2.0 * np.sum(w * psi, axis=1) - problem.kernel.masses * problem.f.values
    return DiscreteFunction(g, problem.mesh)


def _check_membership(problem: Problem, u: DiscreteFunction):
    if not problem.mesh.same_as(u.mesh):
        raise MeshMismatchError("function does not live on the problem mesh")


def _embed(problem: Problem, x: np.ndarray) -> DiscreteFunction:
    vals = np.zeros(problem.mesh.n_nodes)
    vals[problem.mesh.interior] = x
    return DiscreteFunction(vals, problem.mesh, boundary_zero=True)


def minimize(
    problem: Problem,
    u0: DiscreteFunction = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    smoothing_eps0: float = None,
    truncation_level: float = float("inf"),
    energy_trace: list = None,
) -> Solution:
    """Minimize the energy to weak residual tol * (1 + max_i m_i f_i).

    u0 defaults to zero; a warm start whose residual already meets the
    target is returned unchanged.  When smoothing_eps0 is None, a default
    of 0.01 * max(1, ||f||_inf) is used for fields with p_minus < 2 and no
    smoothing otherwise.  If the iteration budget runs out, the best
    iterate is returned flagged non-converged.  ``energy_trace``, if given,
    collects per-stage lists of iterate energies (for monotonicity checks).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mesh = problem.mesh
    if u0 is None:
        u0 = DiscreteFunction(np.zeros(mesh.n_nodes), mesh, boundary_zero=True)
    _check_membership(problem, u0)
    if not u0.boundary_zero:
        raise ValueError("u0 must be boundary-zero")

    target = tol * problem.residual_scale()
    interior = mesh.interior

    def full_residual(u):
        g = energy_gradient(problem, u).values
        return float(np.max(np.abs(g[interior]))) if np.any(interior) else 0.0, g

    res0, g0 = full_residual(u0)
    if res0 <= target:
        return Solution(u0, truncation_level, res0, 0,
                        energy(problem, u0), 0.0, True, g0)

    if smoothing_eps0 is None:
        if problem.field is not None and problem.field.p_minus < 2.0:
            smoothing_eps0 = 0.01 * max(1.0, float(np.max(np.abs(problem.f.values))))
        else:
            smoothing_eps0 = 0.0

    stages = []
    eps = float(smoothing_eps0)
    while eps > 1e-6 * target:
        stages.append(eps)
        eps /= 4.0
    stages.append(0.0)

    x = u0.values[interior].copy()
    iters = 0
    last_eps = 0.0

    for eps in stages:
        remaining = max_iters - iters
        if remaining <= 0:
            break
        trace = [] if energy_trace is not None else None

        def fun(xk, _eps=eps, _trace=trace):
            u = _embed(problem, xk)
            e = energy(problem, u, _eps)
            g = energy_gradient(problem, u, _eps).values[interior]
            if _trace is not None:
                _trace.append(e)
            return e, g

        out = _scipy_minimize(
            fun, x, jac=True, method="L-BFGS-B",
            options={
                "maxiter": remaining,
                "gtol": target,
                "ftol": 1e-300,
                "maxcor": 30,
                "maxls": 60,
            },
        )
        x = out.x
        iters += int(out.nit)
        last_eps = eps
        if energy_trace is not None:
            energy_trace.append(trace)

    u = _embed(problem, x)
    resid, g = full_residual(u)
    return Solution(
        u, truncation_level, resid, iters,
        energy(problem, u), last_eps,
        resid <= target, g,
    )


def approx_sequence(
    problem: Problem,
    levels,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    smoothing_eps0: float = None,
) -> list:
    """Solve the truncated-data problems T_n(f) for each level n, warm
    starting each solve from the previous solution.

    Verifies the discrete comparison principle along the way: solutions
    must be componentwise nondecreasing in n and nonnegative, both within
    10 * tol; a violation raises MonotonicityViolationError (a symptom of
    a too-loose solver tolerance or a defective kernel).
    """
    levels = [float(n) for n in levels]
    if any(n <= 0 for n in levels) or any(
        b <= a for a, b in zip(levels[:-1], levels[1:])
    ):
        raise ValueError("levels must be strictly increasing and positive")

    slack = 10.0 * tol
    out = []
    prev = None
    for n in levels:
        data = truncate(n, problem.f)
        sol = minimize(
            problem.with_data(data),
            u0=prev.u if prev is not None else None,
            tol=tol, max_iters=max_iters, smoothing_eps0=smoothing_eps0,
            truncation_level=n,
        )
        if np.min(sol.u.values) < -slack:
            raise MonotonicityViolationError(
                f"solution at level {n} dips to {np.min(sol.u.values):.3e} < -10*tol"
            )
        if prev is not None:
            margin = float(np.min(sol.u.values - prev.u.values))
            if margin < -slack:
                raise MonotonicityViolationError(
                    f"level {n} lost monotonicity by {margin:.3e} (allowance {slack:.1e})"
                )
        out.append(sol)
        prev = sol
    return out
