"""Small dense Levenberg-Marquardt solver used by the calibration refiners.

The parameter vectors here are tiny (pan, tilt, focal), so Jacobians are
built by central finite differences with per-parameter step sizes matched to
the parameter scales.  The schedule is fixed: damping starts at 1e-3, grows
x10 on a rejected step and shrinks /10 on an accepted one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

#: An accepted step below this norm counts as converged.
STEP_TOL = 1e-10
#: A relative cost decrease below this counts as converged.
COST_TOL = 1e-12

_LAMBDA_MAX = 1e12


@dataclass(frozen=True)
class LMResult:
    x: np.ndarray
    cost: float
    converged: bool
    iterations: int


def _finite_diff_jacobian(residual_fn, x, steps, r0):
    jac = np.empty((len(r0), len(x)))
    for j, h in enumerate(steps):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        rp, rm = residual_fn(xp), residual_fn(xm)
        if rp is None or rm is None:
            # one-sided fallback at the edge of the valid domain
            if rp is None and rm is None:
                return None
            other = rm if rp is None else rp
            sign = -1.0 if rp is None else 1.0
            jac[:, j] = sign * (other - r0) / h
        else:
            jac[:, j] = (rp - rm) / (2.0 * h)
    return jac


def levenberg_marquardt(
    residual_fn: Callable[[np.ndarray], np.ndarray | None],
    x0: np.ndarray,
    steps: np.ndarray,
    max_iterations: int = 100,
    lambda_init: float = 1e-3,
) -> LMResult:
    """Minimise ||residual_fn(x)||^2 starting from ``x0``.

    ``residual_fn`` may return None for parameter vectors outside its valid
    domain (e.g. a point behind the camera); such trial steps are rejected.
    The returned cost is never above the cost at ``x0``.
    """
    x = np.asarray(x0, dtype=float).copy()
    steps = np.asarray(steps, dtype=float)
    r = residual_fn(x)
    if r is None:
        raise ValueError("residuals undefined at the initial point")
    cost = float(r @ r)
    lam = lambda_init
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        jac = _finite_diff_jacobian(residual_fn, x, steps, r)
        if jac is None:
            break
        g = jac.T @ r
        hess = jac.T @ jac
        accepted = False
        while lam <= _LAMBDA_MAX:
            try:
                delta = np.linalg.solve(hess + lam * np.eye(len(x)), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = residual_fn(x + delta)
            if r_new is not None:
                cost_new = float(r_new @ r_new)
                if cost_new <= cost:
                    x = x + delta
                    rel_decrease = (cost - cost_new) / max(cost, 1e-300)
                    r, cost = r_new, cost_new
                    lam = max(lam / 10.0, 1e-15)
                    accepted = True
                    if np.linalg.norm(delta) < STEP_TOL or rel_decrease < COST_TOL:
                        converged = True
                    break
            lam *= 10.0
        if not accepted or converged:
            break

    return LMResult(x=x, cost=cost, converged=converged, iterations=iterations)
