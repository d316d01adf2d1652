"""
Dense convex QP solver for problems of the form

    minimize    1/2 x^T H x + c^T x
    subject to  lower <= A x <= upper

Solved with a Mehrotra predictor-corrector primal-dual interior point method.
Infinite bounds are allowed and simply drop the corresponding one-sided row.
"""

import math
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np
import scipy.linalg

from disturbance_control.errors import DimensionError, InvalidArgumentError
from disturbance_control.utils import get_logger

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"

HESSIAN_FLOOR = 1e-8
STEP_FRACTION = 0.995
DUAL_BLOWUP = 1e14


@dataclass(frozen=True, eq=False)
class QpProblem:
    """Cost matrices and two-sided linear inequality rows."""

    hessian: np.ndarray
    linear_term: np.ndarray
    ineq_matrix: np.ndarray
    ineq_lower: np.ndarray
    ineq_upper: np.ndarray

    def __post_init__(self):
        hessian = np.array(self.hessian, dtype=np.float64)
        if hessian.ndim != 2 or hessian.shape[0] != hessian.shape[1]:
            raise DimensionError(f"hessian must be square, got {hessian.shape}")
        n = hessian.shape[0]
        linear = np.array(self.linear_term, dtype=np.float64).reshape(-1)
        if linear.shape != (n,):
            raise DimensionError(f"linear_term must have {n} entries, got {linear.size}")
        matrix = np.array(self.ineq_matrix, dtype=np.float64).reshape(-1, n)
        m = matrix.shape[0]
        lower = np.array(self.ineq_lower, dtype=np.float64).reshape(-1)
        upper = np.array(self.ineq_upper, dtype=np.float64).reshape(-1)
        if lower.shape != (m,) or upper.shape != (m,):
            raise DimensionError(f"ineq bounds must have {m} entries")
        if not (np.all(np.isfinite(hessian)) and np.all(np.isfinite(linear)) and np.all(np.isfinite(matrix))):
            raise InvalidArgumentError("QP matrices must be finite")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise InvalidArgumentError("QP bounds must not be NaN")
        if not np.allclose(hessian, hessian.T, rtol=0.0, atol=1e-10):
            raise InvalidArgumentError("hessian must be symmetric")
        if np.any(lower > upper):
            raise InvalidArgumentError("ineq_lower must not exceed ineq_upper")
        for name, value in (("hessian", hessian), ("linear_term", linear), ("ineq_matrix", matrix),
                            ("ineq_lower", lower), ("ineq_upper", upper)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def num_variables(self) -> int:
        return int(self.hessian.shape[0])

    @property
    def num_constraints(self) -> int:
        return int(self.ineq_matrix.shape[0])

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.hessian @ x + self.linear_term @ x)

    def primal_violation(self, x: np.ndarray) -> float:
        if self.num_constraints == 0:
            return 0.0
        ax = self.ineq_matrix @ x
        with np.errstate(invalid="ignore"):
            below = np.where(np.isfinite(self.ineq_lower), self.ineq_lower - ax, 0.0)
            above = np.where(np.isfinite(self.ineq_upper), ax - self.ineq_upper, 0.0)
        return float(max(0.0, below.max(), above.max()))


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Solver result; multipliers are signed per row (positive on the lower bound)."""

    x: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str
    multipliers: np.ndarray

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


def kkt_residual(problem: QpProblem, x: Any, multipliers: Any) -> float:
    """
    Largest violation of the KKT conditions at (x, multipliers).

    Args:
        problem: QP problem
        x: Primal point
        multipliers: Signed row multipliers (y > 0 acts on the lower bound, y < 0 on the upper)

    Returns:
        Max of stationarity, primal violation and complementarity residuals
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(multipliers, dtype=np.float64).reshape(-1)
    if x.shape != (problem.num_variables,) or y.shape != (problem.num_constraints,):
        raise DimensionError("x and multipliers must match the problem dimensions")

    gradient = problem.hessian @ x + problem.linear_term - problem.ineq_matrix.T @ y
    residual = float(np.max(np.abs(gradient))) if gradient.size else 0.0
    residual = max(residual, problem.primal_violation(x))
    if problem.num_constraints == 0:
        return residual

    ax = problem.ineq_matrix @ x
    lower, upper = problem.ineq_lower, problem.ineq_upper
    for i in range(problem.num_constraints):
        if y[i] > 0.0:
            gap = y[i] if math.isinf(lower[i]) else y[i] * abs(ax[i] - lower[i])
        elif y[i] < 0.0:
            gap = -y[i] if math.isinf(upper[i]) else -y[i] * abs(upper[i] - ax[i])
        else:
            gap = 0.0
        residual = max(residual, gap)
    return residual


def _one_sided_rows(problem: QpProblem) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Rewrite lower <= A x <= upper as C x >= d, remembering row origin and sign."""
    rows, rhs, origin, sign = [], [], [], []
    for i in range(problem.num_constraints):
        a = problem.ineq_matrix[i]
        if math.isfinite(problem.ineq_lower[i]):
            rows.append(a)
            rhs.append(problem.ineq_lower[i])
            origin.append(i)
            sign.append(1.0)
        if math.isfinite(problem.ineq_upper[i]):
            rows.append(-a)
            rhs.append(-problem.ineq_upper[i])
            origin.append(i)
            sign.append(-1.0)
    n = problem.num_variables
    if not rows:
        return np.zeros((0, n)), np.zeros(0), np.zeros(0, dtype=int), np.zeros(0)
    return np.array(rows), np.array(rhs), np.array(origin, dtype=int), np.array(sign)


def _max_step(values: np.ndarray, steps: np.ndarray) -> float:
    negative = steps < 0.0
    if not np.any(negative):
        return 1.0
    return float(min(1.0, np.min(-values[negative] / steps[negative])))


class QpSolver:
    """
    Interior point QP solver. The Newton matrix carries a small diagonal
    shift when H is singular; residuals are always measured against H itself.
    """

    def __init__(self, tolerance: float = 1e-8, max_iter: int = 100):
        if tolerance <= 0 or max_iter < 1:
            raise InvalidArgumentError("tolerance must be positive and max_iter at least 1")
        self.tolerance = float(tolerance)
        self.max_iter = int(max_iter)
        self.logger = get_logger(self.__class__.__name__)

    def _regularize(self, hessian: np.ndarray) -> np.ndarray:
        n = hessian.shape[0]
        if n == 0:
            return hessian.copy()
        smallest = float(np.min(np.linalg.eigvalsh(hessian)))
        return hessian + max(0.0, HESSIAN_FLOOR - smallest) * np.eye(n)

    def _factor_solve(self, matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        try:
            factor = scipy.linalg.cho_factor(matrix, check_finite=False)
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            return np.linalg.lstsq(matrix, rhs, rcond=None)[0]

    def _solution(self, problem: QpProblem, x: np.ndarray, y: np.ndarray,
                  iterations: int, status: Optional[str] = None) -> QpSolution:
        residual = kkt_residual(problem, x, y)
        if status is None:
            status = OPTIMAL if residual <= self.tolerance else MAX_ITER
        x = np.array(x)
        x.setflags(write=False)
        return QpSolution(x=x, objective=problem.objective(x), kkt_residual=residual,
                          iterations=iterations, status=status, multipliers=np.array(y))

    def solve(self, problem: QpProblem, x0: Optional[Any] = None) -> QpSolution:
        """
        Solve a convex QP.

        Args:
            problem: QP to solve
            x0: Optional warm-start point (need not be feasible)

        Returns:
            QpSolution with status optimal, max_iter (best iterate) or infeasible
        """
        n = problem.num_variables
        hessian = self._regularize(problem.hessian)
        c = problem.linear_term
        C, d, origin, sign = _one_sided_rows(problem)
        m = d.size

        if m == 0:
            # Proximal refinement drives the true gradient to zero on singular H.
            x = np.zeros(n)
            no_rows = np.zeros(problem.num_constraints)
            for iteration in range(1, self.max_iter + 1):
                gradient = problem.hessian @ x + c
                if not n or float(np.max(np.abs(gradient))) <= self.tolerance:
                    break
                x = x - self._factor_solve(hessian, gradient)
            return self._solution(problem, x, no_rows, iteration)

        def multipliers(z: np.ndarray) -> np.ndarray:
            y = np.zeros(problem.num_constraints)
            np.add.at(y, origin, sign * z)
            return y

        x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64).reshape(n)
        s = np.maximum(C @ x - d, 1.0)
        z = np.ones(m)

        best: Optional[Tuple[float, np.ndarray, np.ndarray]] = None
        for iteration in range(1, self.max_iter + 1):
            # Residuals use the true H; only the Newton matrix is regularized.
            r_d = problem.hessian @ x + c - C.T @ z
            r_p = C @ x - s - d
            mu = float(s @ z) / m

            y = multipliers(z)
            residual = kkt_residual(problem, x, y)
            if best is None or residual < best[0]:
                best = (residual, x.copy(), y)
            if residual <= self.tolerance:
                self.logger.debug(f"QP converged in {iteration} iterations (kkt {residual:.2e})")
                return self._solution(problem, x, y, iteration)
            if np.max(z) > DUAL_BLOWUP:
                break

            ratio = z / s
            system = hessian + C.T @ (ratio[:, None] * C)
            if not np.all(np.isfinite(system)):
                break

            def direction(r_c: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
                rhs = -r_d - C.T @ ((r_c + z * r_p) / s)
                dx = self._factor_solve(system, rhs)
                ds = C @ dx + r_p
                dz = (-r_c - z * ds) / s
                return dx, ds, dz

            # Predictor
            dx, ds, dz = direction(s * z)
            alpha = min(_max_step(s, ds), _max_step(z, dz))
            mu_affine = float((s + alpha * ds) @ (z + alpha * dz)) / m
            sigma = (mu_affine / mu) ** 3 if mu > 0 else 0.0

            # Corrector
            dx, ds, dz = direction(s * z + ds * dz - sigma * mu)
            alpha = min(1.0, STEP_FRACTION * min(_max_step(s, ds), _max_step(z, dz)))
            x = x + alpha * dx
            s = np.maximum(s + alpha * ds, 1e-300)
            z = np.maximum(z + alpha * dz, 1e-300)

        y = multipliers(z)
        residual = kkt_residual(problem, x, y)
        if best is None or residual < best[0]:
            best = (residual, x, y)
        _, x_best, y_best = best

        scale = 1.0 + float(np.max(np.abs(d)))
        if problem.primal_violation(x) > max(self.tolerance, 1e-6) * scale:
            self.logger.debug(f"QP infeasible after {iteration} iterations")
            return self._solution(problem, x, y, iteration, status=INFEASIBLE)
        self.logger.debug(f"QP hit the iteration limit (best kkt {best[0]:.2e})")
        return self._solution(problem, x_best, y_best, iteration, status=MAX_ITER)


def solve(problem: QpProblem, tolerance: float = 1e-8, max_iter: int = 100,
          x0: Optional[Any] = None) -> QpSolution:
    """
    Solve a QP with a fresh solver instance.

    Args:
        problem: QP to solve
        tolerance: KKT residual required for status optimal
        max_iter: Iteration budget
        x0: Optional warm-start point

    Returns:
        QpSolution
    """
    return QpSolver(tolerance=tolerance, max_iter=max_iter).solve(problem, x0=x0)
