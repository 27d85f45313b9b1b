"""
Damped Newton iteration for square nonlinear systems.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)


@dataclass
class NewtonResult:
    x: np.ndarray
    success: bool
    nit: int
    residual: float
    message: str = ""


def newton_solve(fun: Callable[[np.ndarray], np.ndarray],
                 jac: Callable[[np.ndarray], np.ndarray],
                 x0: np.ndarray,
                 tol: float = 1e-12,
                 maxiter: int = 50,
                 max_halvings: int = 20) -> NewtonResult:
    """
    Solve fun(x) = 0 starting from x0.

    Each step solves jac(x) dx = -fun(x); the step is halved (up to
    max_halvings times) until the residual norm decreases.

    Args:
        fun: residual map R^n -> R^n
        jac: its Jacobian, n x n
        x0: initial guess
        tol: absolute tolerance on ||fun(x)||
        maxiter: maximum number of Newton steps
        max_halvings: maximum damping halvings per step

    Returns:
        NewtonResult; success is False when the tolerance was not reached
    """
    x = np.array(x0, dtype=float)
    fx = np.asarray(fun(x), dtype=float)
    norm = float(np.linalg.norm(fx))

    for it in range(maxiter + 1):
        if norm <= tol:
            return NewtonResult(x, True, it, norm)
        if it == maxiter:
            break
        try:
            dx = sla.solve(np.asarray(jac(x), dtype=float), -fx)
        except (sla.LinAlgError, ValueError) as e:
            return NewtonResult(x, False, it, norm, f"singular Jacobian: {e}")

        lam = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + lam * dx
            f_new = np.asarray(fun(x_new), dtype=float)
            norm_new = float(np.linalg.norm(f_new))
            if np.isfinite(norm_new) and (norm_new < norm or norm_new <= tol):
                break
            lam *= 0.5
        else:
            return NewtonResult(x, False, it, norm, "damping exhausted")

        x, fx, norm = x_new, f_new, norm_new
        logger.debug(f"newton iter {it + 1}: residual {norm:.3e}, damping {lam:g}")

    return NewtonResult(x, False, maxiter, norm, "maximum iterations reached")
