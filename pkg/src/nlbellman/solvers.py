"""Generalised Bellman operators, fixed-point iteration, and tabular TD(0).

Expectations are computed exactly from the finite-support model; sampling
only happens in :func:`td0`. Terminal states have value 0 and targets
bootstrap from 0 when the next state is terminal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .mdp import Mdp, Policy, RngState, validate, validate_policy
from .transforms import HdtdSingularity, TransformSpec, eval_target

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100_000
DIVERGENCE_RUN = 100


class SolverError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class NonConvergenceError(SolverError):
    pass


class DivergenceError(SolverError):
    pass


class NonexpansionWarning(UserWarning):
    """Issued when a value discount with kappa = 1 only guarantees non-expansion."""


@dataclass
class SolveDiagnostics:
    iterations: int
    final_residual: float
    converged: bool
    empirical_rate: float
    residuals: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "final_residual": self.final_residual,
                "converged": self.converged, "empirical_rate": self.empirical_rate}


@dataclass(frozen=True)
class TdConfig:
    """Settings for :func:`td0`.

    ``visit_decay`` replaces the constant step with ``1 / n(s)``, where
    ``n(s)`` counts updates of state ``s``.
    """

    alpha: float = 0.05
    episodes: int = 1000
    horizon: int = 1000
    seed: int = 0
    visit_decay: bool = False
    start_states: tuple[int, ...] | None = None
    residual_tol: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.episodes < 0 or self.horizon < 1:
            raise ValueError("episodes must be >= 0 and horizon >= 1")


def _check_inputs(mdp: Mdp, policy: Policy | None):
    issues = validate(mdp)
    if policy is not None:
        issues += validate_policy(policy, mdp)
    if issues:
        raise ValueError("invalid model: " + "; ".join(issues))


class _Edges:
    """Flattened support of the one-step distribution.

    Each entry is one (row, next_state, reward) triple with positive weight,
    where ``row`` is a state (policy evaluation) or a state-action index.
    """

    def __init__(self, mdp: Mdp, pi: np.ndarray | None):
        m = mdp.arrays
        S, A = mdp.n_states, mdp.n_actions
        w = m.P[..., None] * m.r_probs  # (S, A, S, M)
        if pi is not None:
            w = w * pi[:, :, None, None]
        s_idx, a_idx, s2_idx, k_idx = np.nonzero(w)
        self.weights = w[s_idx, a_idx, s2_idx, k_idx]
        self.rewards = m.r_vals[s_idx, a_idx, s2_idx, k_idx]
        self.next_states = s2_idx
        self.next_terminal = m.terminal[s2_idx]
        self.rows = s_idx if pi is not None else s_idx * A + a_idx
        self.n_rows = S if pi is not None else S * A

    def expect(self, spec: TransformSpec, v: np.ndarray) -> np.ndarray:
        """Weighted sum of targets per row; ``v`` may be batched as (B, S)."""
        v_next = np.where(self.next_terminal, 0.0, v[..., self.next_states])
        f = eval_target(spec, self.rewards, v_next)
        contrib = np.asarray(f) * self.weights
        out = np.zeros(v.shape[:-1] + (self.n_rows,))
        if v.ndim == 1:
            np.add.at(out, self.rows, contrib)
        else:
            np.add.at(out, (slice(None), self.rows), contrib)
        return out


def _policy_edges(mdp: Mdp, policy: Policy) -> _Edges:
    return _Edges(mdp, policy.matrix(mdp.n_states, mdp.n_actions))


def _as_values(mdp: Mdp, v) -> np.ndarray:
    v = np.array(v, dtype=float)
    if v.shape[-1] != mdp.n_states:
        raise ValueError(f"value vector has length {v.shape[-1]}, expected {mdp.n_states}")
    v[..., np.asarray(mdp.terminal, dtype=bool)] = 0.0
    return v


def apply_operator(mdp: Mdp, policy: Policy, spec: TransformSpec, v) -> np.ndarray:
    """One application of ``T^f``: ``(T v)(s) = E[f(R, v(S')) | s, pi]``."""
    return _policy_edges(mdp, policy).expect(spec, _as_values(mdp, v))


def fixed_point(mdp: Mdp, policy: Policy, spec: TransformSpec, v0=None, tol: float = DEFAULT_TOL,
                max_iters: int = DEFAULT_MAX_ITERS):
    """Iterate ``v <- T v`` until the sup-norm residual drops below ``tol``.

    Returns ``(v, diagnostics)`` where ``v`` satisfies ``|T v - v|_inf < tol``.

    Raises:
        DivergenceError: the residual grew for 100 consecutive sweeps.
        NonConvergenceError: ``max_iters`` sweeps without reaching ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_inputs(mdp, policy)
    if spec.nonexpansion_only:
        warnings.warn("kappa = 1 value discount guarantees only a non-expansion; "
                      "use kappa < 1 for a strict contraction", NonexpansionWarning, stacklevel=2)
    edges = _policy_edges(mdp, policy)
    v = _as_values(mdp, np.zeros(mdp.n_states) if v0 is None else v0)
    residuals = []
    growth = 0
    for it in range(max_iters):
        tv = edges.expect(spec, v)
        resid = float(np.max(np.abs(tv - v))) if len(v) else 0.0
        residuals.append(resid)
        if resid < tol:
            return v, _diagnostics(it, residuals, True)
        if len(residuals) > 1 and resid > residuals[-2]:
            growth += 1
            if growth >= DIVERGENCE_RUN:
                diag = _diagnostics(it + 1, residuals, False)
                raise DivergenceError(
                    f"residual grew for {DIVERGENCE_RUN} consecutive sweeps "
                    f"(now {resid:.3e})", diag)
        else:
            growth = 0
        if not np.all(np.isfinite(tv)):
            raise DivergenceError(f"non-finite values after {it + 1} sweeps",
                                  _diagnostics(it + 1, residuals, False))
        v = tv
    diag = _diagnostics(max_iters, residuals, False)
    raise NonConvergenceError(
        f"no convergence after {max_iters} sweeps: residual {residuals[-1]:.3e}", diag)


def _diagnostics(iterations: int, residuals: list[float], converged: bool) -> SolveDiagnostics:
    r = np.asarray(residuals)
    ratios = r[1:] / r[:-1] if len(r) > 1 else np.array([])
    ratios = ratios[np.isfinite(ratios) & (ratios > 0)]
    rate = float(np.exp(np.mean(np.log(ratios)))) if len(ratios) else float("nan")
    return SolveDiagnostics(iterations, float(r[-1]) if len(r) else 0.0, converged, rate,
                            list(residuals))


def td0(mdp: Mdp, policy: Policy, spec: TransformSpec, cfg: TdConfig = TdConfig(), v0=None):
    """Tabular TD(0) with target ``f(R, v(S'))``; deterministic given ``cfg.seed``.

    Episodes start from ``cfg.start_states`` (uniformly) or, by default, from
    a uniformly drawn non-terminal state, and are truncated at ``cfg.horizon``.
    """
    _check_inputs(mdp, policy)
    S = mdp.n_states
    v = _as_values(mdp, np.zeros(S) if v0 is None else v0)
    if cfg.episodes == 0:
        return v, SolveDiagnostics(0, _bellman_residual(mdp, policy, spec, v), False, float("nan"))

    m = mdp.arrays
    pi = policy.matrix(S, mdp.n_actions)
    starts = cfg.start_states or tuple(s for s in range(S) if not mdp.terminal[s])
    start_p = np.zeros(S)
    start_p[list(starts)] = 1.0 / len(starts)

    pi_cum = _kernels.cumulative(pi)
    P_cum = _kernels.cumulative(np.array(m.P))
    R_cum = _kernels.cumulative(np.array(m.r_probs))
    start_cum = _kernels.cumulative(start_p)
    params = np.array([spec.gamma, spec.k, spec.kappa, spec.r_ref, spec.squash_eps,
                       spec.eta if spec.gamma > 0 else 0.0,
                       _kernels.FAMILY_CODES[spec.family.value]])
    kind = _kernels.KIND_CODES[spec.kind.value]
    counts = np.zeros(S, dtype=np.int64)
    terminal = np.array(m.terminal)

    gen = RngState(cfg.seed).generator()
    need = 1 + 3 * cfg.horizon
    chunk = max(4 * need, 1 << 20)
    buf = np.empty(0)
    remaining = cfg.episodes
    run = 0
    while remaining > 0:
        buf = np.concatenate([buf, gen.random(chunk)])
        done, used, err, step = _kernels.td0_episodes(
            v, counts, pi_cum, P_cum, m.r_vals, R_cum, terminal, start_cum, kind, params,
            cfg.alpha, cfg.visit_decay, cfg.horizon, remaining, buf)
        if err != _kernels.ERR_NONE:
            raise HdtdSingularity(
                f"HDTD target singular in episode {run + done}, step {step}")
        run += done
        remaining -= done
        buf = buf[used:]

    resid = _bellman_residual(mdp, policy, spec, v)
    return v, SolveDiagnostics(run, resid, resid < cfg.residual_tol, float("nan"))


def _bellman_residual(mdp, policy, spec, v) -> float:
    try:
        return float(np.max(np.abs(apply_operator(mdp, policy, spec, v) - v)))
    except HdtdSingularity:
        return float("inf")


def action_values(mdp: Mdp, policy: Policy | None, spec: TransformSpec, v) -> np.ndarray:
    """``q(s, a) = E[f(R, v(S')) | s, a]``; rows of terminal states are 0.

    ``policy`` does not enter the one-step expectation and may be ``None``.
    """
    _check_inputs(mdp, None)
    q = _Edges(mdp, None).expect(spec, _as_values(mdp, v))
    return q.reshape(mdp.n_states, mdp.n_actions)


def greedy_policy(q) -> Policy:
    """Deterministic argmax policy; ties go to the lowest action index."""
    q = np.asarray(q, dtype=float)
    return Policy.deterministic(np.argmax(q, axis=1).tolist())


def _default_v_max(mdp: Mdp, spec: TransformSpec) -> float:
    vals = [abs(r) for dist in mdp.rewards.values() for r, _ in dist]
    r_max = max(vals + [0.0]) or 1.0
    return r_max / (1.0 - spec.gamma) if spec.gamma < 1.0 else 10.0 * r_max


def empirical_contraction(mdp: Mdp, policy: Policy, spec: TransformSpec, pairs: int = 500,
                          v_max: float | None = None, seed: int = 0) -> float:
    """Largest observed ratio ``|T v1 - T v2|_inf / |v1 - v2|_inf`` over random pairs.

    Pair ``i`` draws from its own stream derived from ``seed``, so the result
    does not depend on evaluation order.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    if v_max is None:
        v_max = _default_v_max(mdp, spec)
    if v_max <= 0:
        raise ValueError("v_max must be positive")
    _check_inputs(mdp, policy)
    live = ~np.asarray(mdp.terminal, dtype=bool)
    if not live.any():
        return 0.0
    root = RngState(seed)
    v1 = np.zeros((pairs, mdp.n_states))
    v2 = np.zeros((pairs, mdp.n_states))
    for i in range(pairs):
        gen = root.split(i).generator()
        while True:
            a = gen.uniform(-v_max, v_max, size=mdp.n_states) * live
            b = gen.uniform(-v_max, v_max, size=mdp.n_states) * live
            if np.max(np.abs(a - b), initial=0.0) >= 1e-12:
                break
        v1[i], v2[i] = a, b
    edges = _policy_edges(mdp, policy)
    num = np.max(np.abs(edges.expect(spec, v1) - edges.expect(spec, v2)), axis=1)
    den = np.max(np.abs(v1 - v2), axis=1)
    return float(np.max(num / den))
