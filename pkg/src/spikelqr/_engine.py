"""Hot-path integration kernels, JIT-compiled when numba is available.

The public operations in :mod:`spikelqr.dynamics` stay in plain numpy; these
loop-style twins exist so closed-loop simulation and long energy integrations
do not pay per-call numpy overhead. Equivalence with the numpy path is pinned
by tests.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(func):
            return func

        return deco


@njit(cache=True)
def derivative(cart_mass, suffix, pair, lengths, g, state, u, out):
    """State derivative [qdot; qddot]; solves the (n+1) system in place."""
    n = lengths.shape[0]
    n1 = n + 1
    mat = np.empty((n1, n1))
    rhs = np.empty(n1)

    total = cart_mass + suffix[0]
    mat[0, 0] = total
    rhs[0] = u
    for i in range(n):
        th_i = state[1 + i]
        thd_i = state[n + 2 + i]
        c_i = np.cos(th_i)
        s_i = np.sin(th_i)
        mat[0, 1 + i] = suffix[i] * lengths[i] * c_i
        mat[1 + i, 0] = suffix[i] * c_i
        rhs[0] += suffix[i] * s_i * lengths[i] * thd_i * thd_i
        rhs[1 + i] = g * suffix[i] * s_i
        for j in range(n):
            d = th_i - state[1 + j]
            thd_j = state[n + 2 + j]
            mat[1 + i, 1 + j] = pair[i, j] * lengths[j] * np.cos(d)
            rhs[1 + i] -= pair[i, j] * np.sin(d) * lengths[j] * thd_j * thd_j

    # gaussian elimination with partial pivoting; matrices are at most 5x5
    for col in range(n1 - 1):
        piv = col
        best = abs(mat[col, col])
        for r in range(col + 1, n1):
            v = abs(mat[r, col])
            if v > best:
                best = v
                piv = r
        if piv != col:
            for cc in range(col, n1):
                tmp = mat[col, cc]
                mat[col, cc] = mat[piv, cc]
                mat[piv, cc] = tmp
            tmp = rhs[col]
            rhs[col] = rhs[piv]
            rhs[piv] = tmp
        for r in range(col + 1, n1):
            f = mat[r, col] / mat[col, col]
            for cc in range(col + 1, n1):
                mat[r, cc] -= f * mat[col, cc]
            rhs[r] -= f * rhs[col]
    for row in range(n1 - 1, -1, -1):
        acc = rhs[row]
        for cc in range(row + 1, n1):
            acc -= mat[row, cc] * out[n1 + cc]
        out[n1 + row] = acc / mat[row, row]

    for i in range(n1):
        out[i] = state[n1 + i]
    return out


@njit(cache=True)
def rk4(cart_mass, suffix, pair, lengths, g, state, u, dt):
    dim = state.shape[0]
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    derivative(cart_mass, suffix, pair, lengths, g, state, u, k1)
    derivative(cart_mass, suffix, pair, lengths, g, state + 0.5 * dt * k1, u, k2)
    derivative(cart_mass, suffix, pair, lengths, g, state + 0.5 * dt * k2, u, k3)
    derivative(cart_mass, suffix, pair, lengths, g, state + dt * k3, u, k4)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def advance(cart_mass, suffix, pair, lengths, g, state, u, dt, steps):
    """Integrate `steps` RK4 steps with u held constant (zero-order hold)."""
    s = state.copy()
    for _ in range(steps):
        s = rk4(cart_mass, suffix, pair, lengths, g, s, u, dt)
    return s


@njit(cache=True)
def lif_scan(current, g_leak, c_mem, v_leak, v_th, refractory, dt, v0, tsl0,
             v_floor):
    """Forward-Euler LIF over a current array; returns spike step indices.

    The neuron holds at v_leak while refractory; reset is to v_leak; the
    membrane saturates at v_floor under inhibitory drive (analog boards
    cannot charge below their rail). Returns (spike_steps, v_final,
    time_since_last_spike).
    """
    n = current.shape[0]
    spikes = np.empty(n, dtype=np.int64)
    count = 0
    v = v0
    tsl = tsl0
    for k in range(n):
        if tsl < refractory:
            tsl += dt
            continue
        v += dt * (-g_leak * (v - v_leak) + current[k]) / c_mem
        if v >= v_th:
            spikes[count] = k
            count += 1
            v = v_leak
            tsl = 0.0
        else:
            if v < v_floor:
                v = v_floor
            tsl += dt
    return spikes[:count], v, tsl


@njit(cache=True)
def exp_filter(impulses, alpha, gain, acc0=0.0):
    """First-order IIR y[k] = alpha * y[k-1] + gain * x[k]."""
    out = np.empty_like(impulses)
    acc = acc0
    for k in range(impulses.shape[0]):
        acc = alpha * acc + gain * impulses[k]
        out[k] = acc
    return out
