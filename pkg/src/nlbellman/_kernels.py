"""Compiled inner loops for sample-based TD(0).

The scalar target here mirrors :func:`nlbellman.transforms.eval_target`;
``tests/test_solvers.py`` checks the two agree on a grid for every kind.
"""

import math

import numba
import numpy as np

KIND_CODES = {
    "linear": 0,
    "reward_transform": 1,
    "value_discount": 2,
    "squash": 3,
    "hdtd": 4,
}
FAMILY_CODES = {"linear": 0, "power": 1}

# params layout: gamma, k, kappa, r_ref, eps, eta, family_code
ERR_NONE = 0
ERR_POLE = 1


@numba.njit(cache=True)
def _sign(x):
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


@numba.njit(cache=True)
def _squash(x, eps):
    ax = abs(x)
    return _sign(x) * ax / (math.sqrt(ax + 1.0) + 1.0) + eps * x


@numba.njit(cache=True)
def _unsquash(y, eps):
    ay = abs(y)
    if eps == 0.0:
        return _sign(y) * ay * (ay + 2.0)
    c = 1.0 + eps + ay
    root = math.sqrt(1.0 + 4.0 * eps * c)
    um1 = 4.0 * ay * c / ((1.0 + root) * (1.0 + 2.0 * eps + 2.0 * ay + root))
    return _sign(y) * um1 * (um1 + 2.0)


@numba.njit(cache=True)
def target(kind, params, r, v):
    """Return ``(f(r, v), error_code)``."""
    gamma, k, kappa, r_ref, eps, eta, fam = params[0], params[1], params[2], params[3], \
        params[4], params[5], params[6]
    if kind == 0:
        return r + gamma * v, ERR_NONE
    if kind == 1:
        g = 0.0 if r == 0.0 else r_ref * math.exp(eta * (r / r_ref - 1.0))
        return g + gamma * v, ERR_NONE
    if kind == 2:
        if fam == 0:
            return r + kappa * gamma * v, ERR_NONE
        if gamma == 1.0:
            return r + kappa * v, ERR_NONE
        return r + kappa * _sign(v) * math.expm1(gamma * math.log1p(abs(v))), ERR_NONE
    if kind == 3:
        return _squash(r + gamma * _unsquash(v, eps), eps), ERR_NONE
    denom = 1.0 + k * v
    if abs(denom) <= 1e-9:
        return 0.0, ERR_POLE
    return (r + v) / denom, ERR_NONE


@numba.njit(cache=True)
def _pick(cum, u):
    n = cum.shape[0]
    for i in range(n):
        if u < cum[i]:
            return i
    return n - 1


@numba.njit(cache=True)
def td0_episodes(v, counts, pi_cum, P_cum, R_vals, R_cum, terminal, start_cum,
                 kind, params, alpha, visit_decay, horizon, n_episodes, uniforms):
    """Run up to ``n_episodes`` episodes drawing from ``uniforms``.

    Stops early when the buffer might not cover a full episode. Returns
    ``(episodes_done, uniforms_used, err, err_step)``; on error the offending
    episode is the ``episodes_done``-th (0-based) of this call.
    """
    pos = 0
    need = 1 + 3 * horizon
    n_u = uniforms.shape[0]
    done = 0
    while done < n_episodes:
        if n_u - pos < need:
            break
        s = _pick(start_cum, uniforms[pos])
        pos += 1
        for t in range(horizon):
            if terminal[s]:
                break
            a = _pick(pi_cum[s], uniforms[pos])
            s2 = _pick(P_cum[s, a], uniforms[pos + 1])
            m = _pick(R_cum[s, a, s2], uniforms[pos + 2])
            pos += 3
            r = R_vals[s, a, s2, m]
            v_next = 0.0 if terminal[s2] else v[s2]
            y, err = target(kind, params, r, v_next)
            if err != ERR_NONE:
                return done, pos, err, t
            counts[s] += 1
            step = 1.0 / counts[s] if visit_decay else alpha
            v[s] += step * (y - v[s])
            s = s2
        done += 1
    return done, pos, ERR_NONE, 0


def cumulative(p: np.ndarray) -> np.ndarray:
    """Row-wise cumulative sums with the last positive entry pinned to 1."""
    c = np.cumsum(p, axis=-1)
    flat = c.reshape(-1, c.shape[-1])
    pflat = p.reshape(-1, p.shape[-1])
    for row, prow in zip(flat, pflat):
        pos = np.nonzero(prow > 0)[0]
        if len(pos):
            row[pos[-1]:] = 1.0
    return flat.reshape(c.shape)
