"""Continuous-time LQR: controllability, Riccati solve, gains, and cost.

The algebraic Riccati equation is solved by integrating the matrix Riccati
ODE dP/dtau = A'P + PA - P B R^-1 B' P + Q from P(0) = 0 in time-to-go until
stationary. This needs nothing beyond linear solves and RK4, at the price of
more iterations than a Schur decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spikelqr.dynamics import LinearModel


class UncontrollableError(ValueError):
    """The (A, B) pair fails the controllability rank test."""


class RiccatiConvergenceError(RuntimeError):
    """Riccati ODE integration did not become stationary within budget."""


@dataclass(frozen=True)
class LqrWeights:
    """State cost matrix Q and scalar control cost R."""

    Q: np.ndarray
    R: float

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "Q", q)
        if q.shape[0] != q.shape[1]:
            raise ValueError("Q must be square")
        if np.max(np.abs(q - q.T)) > 1e-12:
            raise ValueError("Q must be symmetric")
        if np.any(np.diag(q) < 0):
            raise ValueError("Q diagonal entries must be >= 0")
        if self.R <= 0:
            raise ValueError("R must be > 0")

    @classmethod
    def from_diag(cls, q_diag, r: float) -> "LqrWeights":
        return cls(Q=np.diag(np.asarray(q_diag, dtype=float)), R=float(r))


def controllability_matrix(model: LinearModel, pivot_tol: float = 1e-9):
    """Controllability matrix [B, AB, ..., A^(n-1)B] and its numerical rank.

    Rank comes from Gaussian elimination with full pivoting on the
    column-normalized matrix; pivots below pivot_tol times the largest pivot
    do not count.
    """
    A, B = model.A, model.B
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    ctrb = np.hstack(blocks)

    work = ctrb.copy()
    norms = np.linalg.norm(work, axis=0)
    norms[norms == 0] = 1.0
    work = work / norms  # scale out the A^k growth so pivots compare fairly
    rank = 0
    largest = 0.0
    rows = list(range(work.shape[0]))
    cols = list(range(work.shape[1]))
    while rows and cols:
        sub = np.abs(work[np.ix_(rows, cols)])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        piv = sub[i, j]
        largest = max(largest, piv)
        if piv <= pivot_tol * largest:
            break
        pr, pc = rows[i], cols[j]
        for r in rows:
            if r != pr:
                work[r, :] -= (work[r, pc] / work[pr, pc]) * work[pr, :]
        rows.remove(pr)
        cols.remove(pc)
        rank += 1
    return ctrb, rank


def _riccati_derivative(P, A, S, Q):
    return A.T @ P + P @ A - P @ S @ P + Q


def solve_care(model: LinearModel, weights: LqrWeights,
               stationary_tol: float = 1e-10, residual_tol: float = 1e-8,
               max_steps: int = 2_000_000) -> np.ndarray:
    """Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0.

    Integrates the Riccati ODE from P(0) = 0 with RK4 and an adaptive step:
    a step whose stationarity residual grows beyond a small factor (or goes
    non-finite) is rejected and the step halved; after a calm stretch the
    step is allowed to grow back. Integration stops when
    ||dP/dtau||_F <= stationary_tol * max(1, ||P||_F).
    """
    A = model.A
    n = A.shape[0]
    if weights.Q.shape[0] != n:
        raise ValueError("Q dimension does not match the model")
    _, rank = controllability_matrix(model)
    if rank < n:
        raise UncontrollableError(f"(A, B) is uncontrollable: rank {rank} < {n}")

    S = (model.B @ model.B.T) / weights.R
    Q = weights.Q
    q_norm = np.linalg.norm(Q)

    P = np.zeros((n, n))
    dtau = 1e-3 * (1.0 / max(np.linalg.norm(A), 1e-2) + 1.0)
    deriv = _riccati_derivative(P, A, S, Q)
    res = np.linalg.norm(deriv)
    accepted_since_reject = 0
    min_dtau = dtau * 2.0 ** -40

    gate = residual_tol * max(np.linalg.norm(Q), 1e-300)
    for _ in range(max_steps):
        # the stationarity residual IS the algebraic residual; run until the
        # looser of the two published tolerances also satisfies the stricter
        if res <= stationary_tol * max(1.0, np.linalg.norm(P)) and res <= gate:
            break
        k1 = deriv
        k2 = _riccati_derivative(P + 0.5 * dtau * k1, A, S, Q)
        k3 = _riccati_derivative(P + 0.5 * dtau * k2, A, S, Q)
        k4 = _riccati_derivative(P + dtau * k3, A, S, Q)
        p_new = P + (dtau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p_new = 0.5 * (p_new + p_new.T)
        d_new = _riccati_derivative(p_new, A, S, Q)
        res_new = np.linalg.norm(d_new)
        if not np.isfinite(res_new) or res_new > 1.2 * res:
            dtau *= 0.5
            accepted_since_reject = 0
            if dtau < min_dtau:
                raise RiccatiConvergenceError("step size collapsed; problem is ill-conditioned")
            continue
        P, deriv, res = p_new, d_new, res_new
        accepted_since_reject += 1
        if accepted_since_reject >= 32:
            dtau *= 1.5
            accepted_since_reject = 0
    else:
        raise RiccatiConvergenceError(f"no stationary point within {max_steps} steps")

    residual = np.linalg.norm(_riccati_derivative(P, A, S, Q))
    if residual > residual_tol * max(q_norm, 1e-300):
        raise RiccatiConvergenceError(
            f"algebraic residual {residual:.3e} exceeds {residual_tol:.1e} * ||Q||")
    return P


def lqr_gain(model: LinearModel, weights: LqrWeights) -> np.ndarray:
    """Feedback row K = R^-1 B' P for the control law u = -K x."""
    P = solve_care(model, weights)
    return (model.B.T @ P).ravel() / weights.R


def closed_loop_decay(model: LinearModel, K: np.ndarray, n_initial: int = 20,
                      duration: float = 20.0, dt: float = 1e-3, seed: int = 0) -> float:
    """Largest final state norm of the linear closed loop x' = (A - BK)x
    started from random unit vectors. Stability check without eigensolvers."""
    n = model.state_dim
    acl = model.A - model.B @ K.reshape(1, n)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, n_initial))
    x /= np.linalg.norm(x, axis=0)
    half = 0.5 * dt
    for _ in range(round(duration / dt)):
        k1 = acl @ x
        k2 = acl @ (x + half * k1)
        k3 = acl @ (x + half * k2)
        k4 = acl @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return float(np.linalg.norm(x, axis=0).max())


def quadratic_cost(trace, weights: LqrWeights) -> float:
    """Trapezoidal integral of x'Qx + u R u over a simulation trace."""
    states = np.asarray(trace.states)
    if states.shape[0] == 0:
        raise ValueError("trace is empty")
    controls = np.asarray(trace.controls)
    integrand = np.einsum("ij,jk,ik->i", states, weights.Q, states)
    integrand = integrand + weights.R * controls ** 2
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(integrand, dx=trace.dt))
