"""Dynamics of an n-linked pendulum on a cart.

Each link is a massless rigid rod with a point mass at its tip, chained
serially from the cart. Generalized coordinates are q = [x, theta_1..theta_n]
with theta = 0 at the upright unstable equilibrium (UEP) and positive theta
tilting a bob toward positive x. States are stored as the flat vector
[x, theta_1..theta_n, xdot, thetadot_1..thetadot_n] of length 2(n+1).

The equations of motion follow the Euler-Lagrange derivation, written in the
row-scaled form M(q) qddot = f(q, qdot, u) where each angle row has been
divided by its link length (so for a cartpole the inertia matrix reads
[[m+M, m l cos(theta)], [m cos(theta), m l]]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spikelqr import _engine

DEFAULT_GRAVITY = 9.81
DEFAULT_CART_MASS = 5.0


@dataclass(frozen=True)
class SystemParams:
    """Physical description of the cart and its chain of point-mass links."""

    n_links: int
    cart_mass: float
    link_masses: np.ndarray
    link_lengths: np.ndarray
    gravity: float = DEFAULT_GRAVITY

    def __post_init__(self):
        object.__setattr__(self, "link_masses", np.asarray(self.link_masses, dtype=float))
        object.__setattr__(self, "link_lengths", np.asarray(self.link_lengths, dtype=float))
        if self.n_links < 1:
            raise ValueError("n_links must be >= 1")
        if len(self.link_masses) != self.n_links or len(self.link_lengths) != self.n_links:
            raise ValueError("link_masses and link_lengths must have length n_links")
        if self.cart_mass <= 0:
            raise ValueError("cart_mass must be > 0")
        if np.any(self.link_masses <= 0) or np.any(self.link_lengths <= 0):
            raise ValueError("link masses and lengths must be > 0")
        # suffix sums c_i = sum_{k >= i} m_k drive every inertia/gravity term
        c = np.cumsum(self.link_masses[::-1])[::-1].copy()
        idx = np.arange(self.n_links)
        object.__setattr__(self, "_mass_suffix", c)
        object.__setattr__(self, "_pair_mass", c[np.maximum.outer(idx, idx)])
        object.__setattr__(self, "_total_mass", self.cart_mass + float(c[0]))

    @property
    def state_dim(self) -> int:
        return 2 * (self.n_links + 1)

    @property
    def total_mass(self) -> float:
        return self._total_mass


def make_plant(n_links: int, cart_mass: float = DEFAULT_CART_MASS,
               total_bob_mass: float = 1.0, total_length: float = 2.0,
               gravity: float = DEFAULT_GRAVITY) -> SystemParams:
    """Build the benchmark plant family: n identical links sharing a fixed
    total bob mass and total length (cartpole, DPC, TPC, 4lPC)."""
    m = total_bob_mass / n_links
    length = total_length / n_links
    return SystemParams(
        n_links=n_links,
        cart_mass=cart_mass,
        link_masses=np.full(n_links, m),
        link_lengths=np.full(n_links, length),
        gravity=gravity,
    )


def upright_state(params: SystemParams, angles=None, cart_position: float = 0.0) -> np.ndarray:
    """State at rest with the given link angles (UEP when angles are zero)."""
    x = np.zeros(params.state_dim)
    x[0] = cart_position
    if angles is not None:
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        if len(angles) != params.n_links:
            raise ValueError("expected one angle per link")
        x[1:params.n_links + 1] = angles
    return x


def split_state(params: SystemParams, state: np.ndarray):
    """Return (x, thetas, xdot, thetadots) views of a flat state vector."""
    n = params.n_links
    return state[0], state[1:n + 1], state[n + 1], state[n + 2:]


def report_order_indices(n_links: int) -> np.ndarray:
    """Index permutation from the internal layout [x, th.., xd, thd..] to the
    conventional report layout [x, xd, th.., thd..]."""
    n = n_links
    return np.concatenate(([0, n + 1], np.arange(1, n + 1), np.arange(n + 2, 2 * n + 2)))


def report_order(params: SystemParams) -> np.ndarray:
    return report_order_indices(params.n_links)


def mass_matrix(params: SystemParams, state: np.ndarray) -> np.ndarray:
    """Row-scaled inertia matrix of the chain, size (n+1) x (n+1).

    Entry (0,0) is M + sum(m_i); angle rows are the symmetric Lagrangian
    inertia rows divided by the corresponding link length.
    """
    _, th, _, _ = split_state(params, state)
    c = params._mass_suffix
    lengths = params.link_lengths
    n = params.n_links
    out = np.empty((n + 1, n + 1))
    out[0, 0] = params._total_mass
    cos_th = np.cos(th)
    out[0, 1:] = c * lengths * cos_th
    out[1:, 0] = c * cos_th
    out[1:, 1:] = params._pair_mass * lengths[None, :] * np.cos(th[:, None] - th[None, :])
    return out


def forcing(params: SystemParams, state: np.ndarray, u: float) -> np.ndarray:
    """Right-hand side of M(q) qddot = f: centrifugal, gravity and input
    terms, in the same row scaling as :func:`mass_matrix`."""
    _, th, _, thd = split_state(params, state)
    c = params._mass_suffix
    lengths = params.link_lengths
    g = params.gravity
    out = np.empty(params.n_links + 1)
    lw2 = lengths * thd * thd
    sin_th = np.sin(th)
    out[0] = u + np.dot(c * sin_th, lw2)
    out[1:] = g * c * sin_th - (params._pair_mass * np.sin(th[:, None] - th[None, :])) @ lw2
    return out


def accel(params: SystemParams, state: np.ndarray, u: float) -> np.ndarray:
    """Generalized accelerations qddot = M(q)^-1 f(q, qdot, u).

    Raises numpy.linalg.LinAlgError if the inertia matrix is singular, which
    signals nonphysical parameters.
    """
    return np.linalg.solve(mass_matrix(params, state), forcing(params, state, u))


def state_derivative(params: SystemParams, state: np.ndarray, u: float) -> np.ndarray:
    """Full state derivative [qdot; qddot] under constant input u."""
    n1 = params.n_links + 1
    out = np.empty(2 * n1)
    out[:n1] = state[n1:]
    out[n1:] = accel(params, state, u)
    return out


def _engine_args(params: SystemParams):
    return (params.cart_mass, params._mass_suffix, params._pair_mass,
            params.link_lengths, params.gravity)


def rk4_step(params: SystemParams, state: np.ndarray, u: float, dt: float) -> np.ndarray:
    """Classical 4-stage Runge-Kutta update with u held constant."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return _engine.rk4(*_engine_args(params), np.asarray(state, dtype=float), float(u), float(dt))


def advance_zoh(params: SystemParams, state: np.ndarray, u: float, dt: float, steps: int) -> np.ndarray:
    """Integrate several RK4 steps under a zero-order-held input."""
    return _engine.advance(*_engine_args(params), np.asarray(state, dtype=float),
                           float(u), float(dt), steps)


def kinetic_energy(params: SystemParams, state: np.ndarray) -> float:
    _, th, xd, thd = split_state(params, state)
    c = params._mass_suffix
    lengths = params.link_lengths
    lw = lengths * thd
    cross = np.dot(c * np.cos(th), lw)
    pair = params._pair_mass * np.cos(th[:, None] - th[None, :])
    return 0.5 * params._total_mass * xd * xd + xd * cross + 0.5 * lw @ pair @ lw


def potential_energy(params: SystemParams, state: np.ndarray) -> float:
    """Gravitational potential, zero with every link upright."""
    _, th, _, _ = split_state(params, state)
    c = params._mass_suffix
    return params.gravity * np.dot(c * params.link_lengths, np.cos(th) - 1.0)


def total_energy(params: SystemParams, state: np.ndarray) -> float:
    """Kinetic plus gravitational potential energy of cart and bobs."""
    return kinetic_energy(params, state) + potential_energy(params, state)


@dataclass(frozen=True)
class LinearModel:
    """State-space matrices of the plant linearized at the UEP."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]


def linearize(params: SystemParams) -> LinearModel:
    """Analytic small-angle linearization at the UEP with zero input.

    Built from the upright inertia matrix and the gravity gradient, not from
    finite differences: qddot = Ml^-1 (G q + e0 u) with G carrying g * c_i on
    each angle and Ml the mass matrix at theta = 0.
    """
    n = params.n_links
    dim = 2 * (n + 1)
    m_up = mass_matrix(params, np.zeros(dim))
    grav = np.zeros((n + 1, n + 1))
    grav[1:, 1:] = np.diag(params.gravity * params._mass_suffix)
    e0 = np.zeros(n + 1)
    e0[0] = 1.0
    acc_rows = np.linalg.solve(m_up, grav)
    b_rows = np.linalg.solve(m_up, e0)

    A = np.zeros((dim, dim))
    A[:n + 1, n + 1:] = np.eye(n + 1)
    A[n + 1:, :n + 1] = acc_rows
    B = np.zeros((dim, 1))
    B[n + 1:, 0] = b_rows
    return LinearModel(A=A, B=B, C=np.eye(dim), D=np.zeros((dim, 1)))
