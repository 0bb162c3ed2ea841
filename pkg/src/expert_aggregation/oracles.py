"""Hindsight reference forecasters computed offline over a full panel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ForecastPanel, uniform_weights
from .losses import SQUARE, LossSpec, loss


@dataclass
class ConvexOracleSolution:
    q: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _require_rows(panel: ForecastPanel) -> None:
    if len(panel) == 0:
        raise ValueError("oracles need a non-empty panel")


def best_expert(panel: ForecastPanel, spec: LossSpec = SQUARE) -> tuple[int, float]:
    """Index and cumulative loss of the best single expert; lowest index wins ties."""
    _require_rows(panel)
    totals = loss(spec, panel.X, panel.y[:, None]).sum(axis=0)
    idx = int(np.argmin(totals))
    return idx, float(totals[idx])


def best_compound(panel: ForecastPanel, spec: LossSpec = SQUARE) -> tuple[np.ndarray, float]:
    """Per-round losses of the expert that is best at each round, and their RMSE.

    The RMSE is that of the compound expert's predictions, whatever loss picks them.
    """
    _require_rows(panel)
    per_round = np.atleast_2d(loss(spec, panel.X, panel.y[:, None]))
    pick = np.argmin(per_round, axis=1)
    rows = np.arange(len(panel))
    errors = panel.X[rows, pick] - panel.y
    return per_round[rows, pick], float(np.sqrt(np.mean(errors**2)))


def uniform_predictions(panel: ForecastPanel) -> np.ndarray:
    return panel.X @ uniform_weights(panel.n_experts)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _largest_eigenvalue(G: np.ndarray, iterations: int = 500, tol: float = 1e-12) -> float:
    """Power iteration on a symmetric PSD matrix."""
    v = np.ones(G.shape[0]) / np.sqrt(G.shape[0])
    lam = 0.0
    for _ in range(iterations):
        g = G @ v
        norm = np.linalg.norm(g)
        if norm == 0.0:
            return 0.0
        v = g / norm
        new = float(v @ G @ v)
        if abs(new - lam) <= tol * max(abs(new), 1.0):
            lam = new
            break
        lam = new
    return lam


def best_convex(panel: ForecastPanel, max_iter: int = 10_000, rtol: float = 1e-10,
                kkt_tol: float = 1e-7, stall_window: int = 1000) -> ConvexOracleSolution:
    """Best fixed convex combination under square loss.

    Minimizes ``sum_t (q . x_t - y_t)**2`` over the simplex by accelerated
    projected gradient (step ``1/L``, ``L`` from power iteration on the Gram
    matrix, momentum restarted whenever it points uphill). Stops once the
    gradient mapping is below ``kkt_tol * (1 + |grad|)``; as a fallback, when
    the best objective improved by less than ``rtol`` (relative) over the last
    ``stall_window`` iterations. Starts
    from the best vertex and returns the best iterate, so the result never
    loses to the best expert.
    """
    _require_rows(panel)
    X, y = panel.X, panel.y
    n = panel.n_experts
    if n == 1:
        q = np.ones(1)
        return ConvexOracleSolution(q, float(np.sum((X[:, 0] - y) ** 2)), 0, True)

    G = X.T @ X
    b = X.T @ y
    c = float(y @ y)

    def objective(q):
        r = X @ q - y
        return float(r @ r)

    lip = 2.0 * _largest_eigenvalue(G) * (1.0 + 1e-9)
    if lip <= 0.0:
        q = uniform_weights(n)
        return ConvexOracleSolution(q, objective(q), 0, True)
    idx, _ = best_expert(panel, SQUARE)
    q = np.zeros(n)
    q[idx] = 1.0
    best_q, best_f = q, objective(q)
    z, momentum = q, 1.0
    history = [best_f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        q_new = project_simplex(z - 2.0 * (G @ z - b) / lip)
        # gradient-based restart: drop momentum when it points uphill
        if (z - q_new) @ (q_new - q) > 0:
            momentum = 1.0
        m_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum**2))
        z = q_new + ((momentum - 1.0) / m_new) * (q_new - q)
        q, momentum = q_new, m_new
        f = objective(q)
        if f < best_f:
            best_q, best_f = q, f
        grad = 2.0 * (G @ q - b)
        mapping = lip * (q - project_simplex(q - grad / lip))
        if np.linalg.norm(mapping) <= kkt_tol * (1.0 + np.linalg.norm(grad)):
            converged = True
            break
        history.append(best_f)
        if len(history) > stall_window and history[-stall_window - 1] - best_f <= rtol * max(best_f, 1e-300):
            converged = True
            break
    return ConvexOracleSolution(best_q, best_f, it, converged)


def projected_gradient_norm(panel: ForecastPanel, q) -> tuple[float, float]:
    """Norm of the gradient mapping at ``q`` and of the raw gradient (KKT diagnostic)."""
    X, y = panel.X, panel.y
    grad = 2.0 * X.T @ (X @ q - y)
    lip = 2.0 * _largest_eigenvalue(X.T @ X)
    mapping = lip * (q - project_simplex(q - grad / lip))
    return float(np.linalg.norm(mapping)), float(np.linalg.norm(grad))
