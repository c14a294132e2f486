"""First-order oracles: objective values, gradients, curvature constants.

Two problem families are provided, the ridge-regularized least-squares loss

    f(x) = 1/(2m) * ||A x - y||^2 + tau/2 * ||x||^2

and the ridge-regularized logistic loss

    f(x) = 1/m * sum_i log(1 + exp(-b_i <a_i, x>)) + tau/2 * ||x||^2,

plus the separable diagonal family used for condition-number sweeps.  For the
regularized families the reported strong convexity is ``tau``; the curvature
contributed by the data is not estimated.

Oracles are immutable after construction and can be shared between runs.
"""

from __future__ import annotations

import abc
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.special import expit

from .errors import (
    DimensionError,
    GroundTruthError,
    LipschitzNotConverged,
    NonFiniteError,
)

logger = logging.getLogger(__name__)

#: Inflation applied to iteratively estimated Lipschitz constants.  Power
#: iteration approaches the top eigenvalue from below, while the 1/L gradient
#: step needs an upper bound.
LIPSCHITZ_SAFETY = 1.01


def _check_point(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionError(f"expected a vector of length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("point has non-finite entries")
    return x


class ObjectiveOracle(abc.ABC):
    """Black-box access to an L-smooth, mu-strongly convex function."""

    @property
    @abc.abstractmethod
    def dim(self) -> int: ...

    @property
    @abc.abstractmethod
    def lipschitz(self) -> float: ...

    @property
    @abc.abstractmethod
    def strong_convexity(self) -> float: ...

    @abc.abstractmethod
    def _value_and_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]: ...

    def _value(self, x):
        return self._value_and_gradient(x)[0]

    def _gradient(self, x):
        return self._value_and_gradient(x)[1]

    def value(self, x) -> float:
        return float(self._value(_check_point(x, self.dim)))

    def gradient(self, x) -> np.ndarray:
        return self._gradient(_check_point(x, self.dim))

    def value_and_gradient(self, x) -> tuple[float, np.ndarray]:
        f, g = self._value_and_gradient(_check_point(x, self.dim))
        return float(f), g

    def lipschitz_operator(self):
        """Return ``(matvec, scale, shift)`` with ``L = scale * lambda_max(op) + shift``.

        ``None`` means no global curvature bound is available.
        """
        return None

    @property
    def condition_number(self) -> float:
        mu = self.strong_convexity
        return self.lipschitz / mu if mu > 0 else float("inf")


def eval_value(oracle: ObjectiveOracle, x) -> float:
    return oracle.value(x)


def eval_gradient(oracle: ObjectiveOracle, x) -> np.ndarray:
    return oracle.gradient(x)


class _Design:
    """Matrix wrapper over dense, scipy-sparse or diagonal-compact storage."""

    def __init__(self, design):
        if sparse.issparse(design):
            self.kind = "sparse"
            self.mat = sparse.csr_matrix(design, dtype=float)
            self.shape = self.mat.shape
        else:
            arr = np.asarray(design, dtype=float)
            if arr.ndim == 1:
                self.kind = "diag"
                self.mat = arr
                self.shape = (arr.shape[0], arr.shape[0])
            elif arr.ndim == 2:
                self.kind = "dense"
                self.mat = arr
                self.shape = arr.shape
            else:
                raise DimensionError(f"design must be 1-D (diagonal) or 2-D, got {arr.ndim}-D")
        if self.kind != "sparse" and not np.all(np.isfinite(self.mat)):
            raise NonFiniteError("design has non-finite entries")

    def matvec(self, x):
        if self.kind == "diag":
            return self.mat * x
        return self.mat @ x

    def rmatvec(self, r):
        if self.kind == "diag":
            return self.mat * r
        return self.mat.T @ r

    def gram(self):
        """Dense A^T A."""
        if self.kind == "diag":
            return np.diag(self.mat**2)
        if self.kind == "sparse":
            return (self.mat.T @ self.mat).toarray()
        return self.mat.T @ self.mat


class QuadraticProblem(ObjectiveOracle):
    """Ridge-regularized least squares, ``1/(2m)||Ax - y||^2 + tau/2 ||x||^2``.

    Parameters
    ----------
    design : array_like or sparse matrix
        ``m x n`` matrix, or a 1-D array holding the diagonal of a square one.
    targets : array_like
        Length-``m`` vector ``y``.
    ridge : float
        ``tau >= 0``.
    lipschitz, strong_convexity : float, optional
        Overrides.  By default ``L`` is exact for diagonal designs and
        ``LIPSCHITZ_SAFETY`` times a power-iteration estimate otherwise, and
        ``mu = tau``.
    """

    def __init__(self, design, targets, ridge=0.0, *, lipschitz=None, strong_convexity=None):
        self._A = _Design(design)
        m, n = self._A.shape
        y = np.asarray(targets, dtype=float)
        if y.shape != (m,):
            raise DimensionError(f"targets must have length {m}, got shape {y.shape}")
        if ridge < 0 or not np.isfinite(ridge):
            raise ValueError("ridge must be a finite nonnegative number")
        self._y = y
        self._m = m
        self._n = n
        self.ridge = float(ridge)
        self._mu = float(ridge if strong_convexity is None else strong_convexity)
        if lipschitz is None:
            if self._A.kind == "diag":
                top = float(np.max(self._A.mat**2)) if n else 0.0
                lipschitz = top / m + self.ridge if m else self.ridge
            else:
                lipschitz = LIPSCHITZ_SAFETY * estimate_lipschitz(self)
        self._L = float(lipschitz)
        if not 0 <= self._mu <= self._L:
            raise ValueError(f"need 0 <= mu <= L, got mu={self._mu}, L={self._L}")

    @property
    def dim(self):
        return self._n

    @property
    def n_samples(self):
        return self._m

    @property
    def lipschitz(self):
        return self._L

    @property
    def strong_convexity(self):
        return self._mu

    @property
    def design(self):
        return self._A.mat

    @property
    def targets(self):
        return self._y

    @property
    def is_diagonal(self):
        return self._A.kind == "diag"

    def _value_and_gradient(self, x):
        r = self._A.matvec(x) - self._y
        f = 0.5 * float(r @ r) / self._m + 0.5 * self.ridge * float(x @ x)
        g = self._A.rmatvec(r) / self._m + self.ridge * x
        return f, g

    def hessian_matvec(self, v):
        return self._A.rmatvec(self._A.matvec(v)) / self._m + self.ridge * v

    def hessian(self):
        return self._A.gram() / self._m + self.ridge * np.eye(self._n)

    def lipschitz_operator(self):
        return self.hessian_matvec, 1.0, 0.0


class DiagonalQuadratic(ObjectiveOracle):
    """Separable quadratic ``1/2 * sum_i d_i (x_i - c_i)^2``.

    ``L = max(d)`` and ``mu = min(d)`` exactly, so the condition number is
    whatever the curvature vector says it is.
    """

    def __init__(self, curvatures, center):
        d = np.asarray(curvatures, dtype=float)
        c = np.asarray(center, dtype=float)
        if d.ndim != 1 or c.shape != d.shape:
            raise DimensionError("curvatures and center must be 1-D of equal length")
        if d.size == 0 or np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ValueError("curvatures must be finite and positive")
        self.curvatures = d
        self.center = c

    @property
    def dim(self):
        return self.curvatures.shape[0]

    @property
    def lipschitz(self):
        return float(self.curvatures.max())

    @property
    def strong_convexity(self):
        return float(self.curvatures.min())

    def _value_and_gradient(self, x):
        dx = x - self.center
        g = self.curvatures * dx
        return 0.5 * float(dx @ g), g

    def hessian_matvec(self, v):
        return self.curvatures * v

    def lipschitz_operator(self):
        return self.hessian_matvec, 1.0, 0.0


class LogisticProblem(ObjectiveOracle):
    """Ridge-regularized logistic loss with labels in {-1, +1}.

    ``L`` defaults to ``LIPSCHITZ_SAFETY * (lambda_max(A^T A) / (4m) + tau)``.
    """

    def __init__(self, design, labels, ridge=0.0, *, lipschitz=None):
        self._A = _Design(design)
        m, n = self._A.shape
        b = np.asarray(labels, dtype=float)
        if b.shape != (m,):
            raise DimensionError(f"labels must have length {m}, got shape {b.shape}")
        if not np.all(np.abs(b) == 1.0):
            raise ValueError("labels must be -1 or +1")
        if ridge < 0 or not np.isfinite(ridge):
            raise ValueError("ridge must be a finite nonnegative number")
        self._b = b
        self._m = m
        self._n = n
        self.ridge = float(ridge)
        if lipschitz is None:
            lipschitz = LIPSCHITZ_SAFETY * estimate_lipschitz(self)
        self._L = float(lipschitz)

    @property
    def dim(self):
        return self._n

    @property
    def n_samples(self):
        return self._m

    @property
    def lipschitz(self):
        return self._L

    @property
    def strong_convexity(self):
        return self.ridge

    @property
    def design(self):
        return self._A.mat

    @property
    def labels(self):
        return self._b

    def _value_and_gradient(self, x):
        z = self._b * self._A.matvec(x)
        # log(1 + e^{-z}) without overflow
        f = float(np.mean(np.logaddexp(0.0, -z))) if self._m else 0.0
        f += 0.5 * self.ridge * float(x @ x)
        w = self._b * expit(-z)
        g = -self._A.rmatvec(w) / max(self._m, 1) + self.ridge * x
        return f, g

    def lipschitz_operator(self):
        def gram(v):
            return self._A.rmatvec(self._A.matvec(v))

        return gram, 1.0 / (4 * max(self._m, 1)), self.ridge


def _power_iteration(matvec, n, iters, tol):
    if n == 0:
        return 0.0
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    prev = q = float(v @ matvec(v))
    for _ in range(iters):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        prev, q = q, float(v @ matvec(v))
        if abs(q - prev) <= tol * abs(q):
            return q
    raise LipschitzNotConverged(
        f"power iteration did not converge in {iters} iterations", (prev, q)
    )


def estimate_lipschitz(oracle: ObjectiveOracle, iters: int = 10000, tol: float = 1e-12,
                       safety: float = 1.0) -> float:
    """Estimate the gradient Lipschitz constant by power iteration.

    Quadratics: top eigenvalue of the Hessian.  Logistic: ``lambda_max(A^T A)
    / (4m) + tau``.  The raw estimate is multiplied by ``safety``; problem
    constructors pass ``LIPSCHITZ_SAFETY``.
    """
    op = oracle.lipschitz_operator()
    if op is None:
        raise TypeError(f"{type(oracle).__name__} exposes no curvature operator")
    matvec, scale, shift = op
    top = _power_iteration(matvec, oracle.dim, iters, tol)
    return safety * (scale * top + shift)


@dataclass(frozen=True)
class GroundTruth:
    x_star: np.ndarray
    f_star: float
    method: str  # "closed_form" | "high_accuracy_solve"
    residual_grad_norm: float
    tol: float = float("nan")

    def dist(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x) - self.x_star))


def default_truth_tol(oracle: ObjectiveOracle, x0=None) -> float:
    x0 = np.zeros(oracle.dim) if x0 is None else x0
    return 1e-10 * (1.0 + float(np.linalg.norm(oracle.gradient(x0))))


def ground_truth(oracle: ObjectiveOracle, tol: float | None = None, *, x0=None,
                 max_iters: int = 1_000_000) -> GroundTruth:
    """Compute the minimizer to gradient-norm ``tol``.

    Diagonal and least-squares problems are solved directly; the logistic
    loss is driven to ``||grad|| <= tol`` with the constant-step fast gradient
    scheme (gamma_0 = mu).
    """
    if tol is None:
        tol = default_truth_tol(oracle, x0)

    if isinstance(oracle, DiagonalQuadratic):
        x = oracle.center.copy()
        method = "closed_form"
    elif isinstance(oracle, QuadraticProblem):
        x = _solve_normal_equations(oracle, tol)
        method = "closed_form"
    else:
        if oracle.strong_convexity <= 0:
            raise GroundTruthError("strong convexity must be positive for an iterative solve")
        x = _iterative_truth(oracle, tol, x0, max_iters)
        method = "high_accuracy_solve"

    f, g = oracle.value_and_gradient(x)
    res = float(np.linalg.norm(g))
    if res > tol:
        raise GroundTruthError(f"gradient norm {res:.3e} above tolerance {tol:.3e}", res)
    return GroundTruth(x_star=x, f_star=f, method=method, residual_grad_norm=res, tol=tol)


def _solve_normal_equations(problem: QuadraticProblem, tol):
    m = problem.n_samples
    rhs = problem._A.rmatvec(problem.targets) / m
    if problem.is_diagonal:
        a = problem.design
        denom = a * a / m + problem.ridge
        if np.any(denom <= 0):
            raise GroundTruthError("singular Hessian (zero diagonal entry with tau = 0)")
        return rhs / denom
    H = problem.hessian()
    try:
        cho = sla.cho_factor(H)
    except sla.LinAlgError as exc:
        raise GroundTruthError(f"Hessian is not positive definite: {exc}") from exc
    x = sla.cho_solve(cho, rhs)
    # iterative refinement
    for _ in range(3):
        g = problem.gradient(x)
        if np.linalg.norm(g) <= tol:
            break
        x = x - sla.cho_solve(cho, g)
    return x


def _iterative_truth(oracle, tol, x0, max_iters):
    from .solvers import GRAD_NORM, SolverConfig, StoppingRule, run

    x0 = np.zeros(oracle.dim) if x0 is None else np.asarray(x0, dtype=float)
    config = SolverConfig.preset("fgm-css3", oracle, stop=StoppingRule(GRAD_NORM, tol),
                                 max_iters=max_iters, stall_check=False)
    state, _ = run(oracle, config, x0, record=False)
    if state.grad_last is None or np.linalg.norm(state.grad_last) > tol:
        res = float("nan") if state.grad_last is None else float(np.linalg.norm(state.grad_last))
        raise GroundTruthError(f"iteration cap {max_iters} reached, residual {res:.3e}", res)
    return state.y_last.copy()


def check_gradient(oracle: ObjectiveOracle, x, h: float = 1e-6) -> float:
    """Largest coordinatewise error between the gradient and central differences.

    Errors are relative with a unit floor, ``|g_i - fd_i| / max(1, |g_i|)``.
    The step is ``h * (1 + ||x||_inf)``.  Non-finite differences give ``inf``.
    """
    x = _check_point(x, oracle.dim)
    n = x.shape[0]
    if n == 0:
        return 0.0
    step = h * (1.0 + float(np.max(np.abs(x))))
    g = oracle.gradient(x)
    worst = 0.0
    e = np.zeros(n)
    for i in range(n):
        e[i] = step
        fd = (oracle._value(x + e) - oracle._value(x - e)) / (2 * step)
        e[i] = 0.0
        if not np.isfinite(fd):
            return float("inf")
        worst = max(worst, abs(g[i] - fd) / max(1.0, abs(g[i])))
    return worst
