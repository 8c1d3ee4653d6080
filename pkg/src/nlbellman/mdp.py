"""Finite tabular MDPs, policies, and seeded simulation.

Rewards are finite-support distributions attached to each
``(state, action, next_state)`` edge, so every expectation over the model
can be evaluated exactly. Terminal states have no outgoing transitions and
a fixed value of zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12

Edge = tuple[int, float]
Support = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class RngState:
    """Counter-based random state (Philox key + block counter).

    Each draw reads one Philox block at ``counter`` and returns a state with
    the counter advanced, so the state can be threaded through pure calls.
    """

    key: int
    counter: int = 0

    def uniforms(self, n: int) -> tuple[np.ndarray, "RngState"]:
        blocks = max(1, -(-n // 4))
        bitgen = np.random.Philox(key=self.key, counter=self.counter)
        u = np.random.Generator(bitgen).random(n)
        return u, RngState(self.key, self.counter + blocks)

    def split(self, index: int) -> "RngState":
        """Independent child stream for ``index`` (used for per-task seeds)."""
        child = np.random.SeedSequence([self.key, self.counter, index])
        return RngState(int(child.generate_state(1, dtype=np.uint64)[0]))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key, counter=self.counter))


def as_rng(rng: RngState | int) -> RngState:
    return rng if isinstance(rng, RngState) else RngState(int(rng))


@dataclass(frozen=True)
class Mdp:
    n_states: int
    n_actions: int
    transitions: Mapping[tuple[int, int], tuple[Edge, ...]]
    rewards: Mapping[tuple[int, int, int], Support]
    terminal: tuple[bool, ...]

    def __post_init__(self):
        # normalise containers so instances are effectively immutable
        object.__setattr__(self, "terminal", tuple(bool(t) for t in self.terminal))
        object.__setattr__(
            self,
            "transitions",
            {(int(s), int(a)): tuple((int(s2), float(p)) for s2, p in out)
             for (s, a), out in self.transitions.items()},
        )
        object.__setattr__(
            self,
            "rewards",
            {(int(s), int(a), int(s2)): tuple((float(r), float(p)) for r, p in dist)
             for (s, a, s2), dist in self.rewards.items()},
        )

    def reward_dist(self, s: int, a: int, s2: int) -> Support:
        return self.rewards.get((s, a, s2), ((0.0, 1.0),))

    @cached_property
    def arrays(self) -> "DenseModel":
        return DenseModel.from_mdp(self)


@dataclass(frozen=True)
class DenseModel:
    """Padded array view of an :class:`Mdp` for vectorised evaluation.

    ``P[s, a, s2]`` is the transition kernel; ``r_vals`` and ``r_probs`` have
    shape ``(S, A, S, M)`` where ``M`` is the largest reward support size.
    Padding entries carry probability zero.
    """

    P: np.ndarray
    r_vals: np.ndarray
    r_probs: np.ndarray
    terminal: np.ndarray

    @classmethod
    def from_mdp(cls, mdp: Mdp) -> "DenseModel":
        S, A = mdp.n_states, mdp.n_actions
        M = max([len(d) for d in mdp.rewards.values()] + [1])
        P = np.zeros((S, A, S))
        r_vals = np.zeros((S, A, S, M))
        r_probs = np.zeros((S, A, S, M))
        for (s, a), out in mdp.transitions.items():
            for s2, p in out:
                P[s, a, s2] += p
                dist = mdp.reward_dist(s, a, s2)
                for m, (r, q) in enumerate(dist):
                    r_vals[s, a, s2, m] = r
                    r_probs[s, a, s2, m] = q
        terminal = np.array(mdp.terminal, dtype=bool)
        for arr in (P, r_vals, r_probs, terminal):
            arr.setflags(write=False)
        return cls(P, r_vals, r_probs, terminal)


@dataclass(frozen=True)
class Policy:
    probs: Mapping[int, tuple[tuple[int, float], ...]]

    def __post_init__(self):
        object.__setattr__(
            self,
            "probs",
            {int(s): tuple((int(a), float(p)) for a, p in row) for s, row in self.probs.items()},
        )

    @classmethod
    def uniform(cls, mdp: Mdp) -> "Policy":
        p = 1.0 / mdp.n_actions
        return cls({s: tuple((a, p) for a in range(mdp.n_actions))
                    for s in range(mdp.n_states) if not mdp.terminal[s]})

    @classmethod
    def deterministic(cls, actions: Sequence[int]) -> "Policy":
        return cls({s: ((int(a), 1.0),) for s, a in enumerate(actions)})

    @classmethod
    def from_matrix(cls, pi: np.ndarray) -> "Policy":
        return cls({s: tuple((a, float(p)) for a, p in enumerate(row) if p > 0)
                    for s, row in enumerate(np.asarray(pi))})

    def matrix(self, n_states: int, n_actions: int) -> np.ndarray:
        pi = np.zeros((n_states, n_actions))
        for s, row in self.probs.items():
            for a, p in row:
                pi[s, a] += p
        return pi


@dataclass(frozen=True)
class Step:
    state: int
    action: int
    reward: float
    next_state: int
    terminal: bool


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    seed: int
    final_rng: RngState | None = field(default=None, compare=False)

    def __len__(self):
        return len(self.steps)

    @property
    def rewards(self) -> list[float]:
        return [st.reward for st in self.steps]


def validate(mdp: Mdp) -> list[str]:
    """Return a list of invariant violations; empty means the MDP is valid."""
    issues = []
    S, A = mdp.n_states, mdp.n_actions
    if S < 1 or A < 1:
        issues.append(f"n_states={S} and n_actions={A} must be positive")
        return issues
    if len(mdp.terminal) != S:
        issues.append(f"terminal flags have length {len(mdp.terminal)}, expected {S}")
        return issues
    for (s, a), out in sorted(mdp.transitions.items()):
        if not (0 <= s < S and 0 <= a < A):
            issues.append(f"transition key ({s},{a}) out of range")
            continue
        if mdp.terminal[s]:
            if out:
                issues.append(f"terminal state {s} has transitions at ({s},{a})")
            continue
        total = 0.0
        for s2, p in out:
            if not 0 <= s2 < S:
                issues.append(f"next state {s2} out of range at ({s},{a})")
            if p < 0:
                issues.append(f"negative probability {p!r} at ({s},{a})->{s2}")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            issues.append(f"row sum {total:.12g} at ({s},{a})")
    for s in range(S):
        if mdp.terminal[s]:
            continue
        for a in range(A):
            if (s, a) not in mdp.transitions:
                issues.append(f"missing transitions at ({s},{a})")
    for (s, a, s2), dist in sorted(mdp.rewards.items()):
        total = 0.0
        for r, p in dist:
            if not np.isfinite(r):
                issues.append(f"non-finite reward {r!r} at ({s},{a},{s2})")
            if p < 0:
                issues.append(f"negative reward probability {p!r} at ({s},{a},{s2})")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            issues.append(f"reward distribution sums to {total:.12g} at ({s},{a},{s2})")
    return issues


def validate_policy(policy: Policy, mdp: Mdp) -> list[str]:
    issues = []
    for s, row in sorted(policy.probs.items()):
        if not 0 <= s < mdp.n_states:
            issues.append(f"policy state {s} out of range")
            continue
        total = 0.0
        for a, p in row:
            if not 0 <= a < mdp.n_actions:
                issues.append(f"invalid action {a} in policy at state {s}")
            if p < 0:
                issues.append(f"negative policy probability {p!r} at state {s}")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            issues.append(f"policy row sum {total:.12g} at state {s}")
    for s in range(mdp.n_states):
        if not mdp.terminal[s] and s not in policy.probs:
            issues.append(f"policy has no distribution for state {s}")
    return issues


def _pick(items: Sequence, probs: Sequence[float], u: float):
    acc = 0.0
    for item, p in zip(items, probs):
        acc += p
        if u < acc:
            return item
    # round-off in the cumulative sum: fall back to the last positive entry
    for item, p in zip(reversed(items), reversed(probs)):
        if p > 0:
            return item
    return items[-1]


def sample_step(mdp: Mdp, state: int, action: int, rng: RngState | int):
    """Draw ``(reward, next_state, terminal_flag, rng')`` for one transition."""
    rng = as_rng(rng)
    if mdp.terminal[state]:
        raise ValueError(f"cannot sample from terminal state {state}")
    if not 0 <= action < mdp.n_actions:
        raise ValueError(f"invalid action {action}")
    out = mdp.transitions[(state, action)]
    (u_s, u_r), rng = rng.uniforms(2)
    s2 = _pick([e[0] for e in out], [e[1] for e in out], u_s)
    dist = mdp.reward_dist(state, action, s2)
    r = _pick([d[0] for d in dist], [d[1] for d in dist], u_r)
    return r, s2, mdp.terminal[s2], rng


def rollout(mdp: Mdp, policy: Policy, start_state: int, horizon: int,
            rng: RngState | int) -> Trajectory:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = as_rng(rng)
    seed = rng.key
    steps = []
    s = start_state
    while not mdp.terminal[s] and len(steps) < horizon:
        row = policy.probs[s]
        (u,), rng = rng.uniforms(1)
        a = _pick([x[0] for x in row], [x[1] for x in row], u)
        r, s2, done, rng = sample_step(mdp, s, a, rng)
        steps.append(Step(s, a, r, s2, done))
        s = s2
    return Trajectory(tuple(steps), seed, rng)


def transition_matrix(mdp: Mdp, policy: Policy) -> np.ndarray:
    """State-to-state kernel ``P_pi[s, s2]`` induced by ``policy``."""
    pi = policy.matrix(mdp.n_states, mdp.n_actions)
    return np.einsum("sa,sat->st", pi, mdp.arrays.P)


def stationary_distribution(mdp: Mdp, policy: Policy, tol: float = 1e-12,
                            max_iters: int = 1_000_000) -> np.ndarray:
    """Steady-state distribution ``d = d P_pi`` by power iteration.

    Iterates on the lazy chain ``(I + P_pi) / 2``, which has the same
    stationary distribution but is aperiodic. Convergence is judged on the
    original kernel.
    """
    if any(mdp.terminal):
        raise ValueError("stationary distribution requires an MDP without terminal states")
    P = transition_matrix(mdp, policy)
    lazy = 0.5 * (P + np.eye(mdp.n_states))
    d = np.full(mdp.n_states, 1.0 / mdp.n_states)
    resid = np.inf
    for _ in range(max_iters):
        resid = np.abs(d @ P - d).sum()
        if resid < tol:
            return d
        d = d @ lazy
        d /= d.sum()
    raise RuntimeError(
        f"stationary distribution did not converge: residual {resid:.3e} "
        "(is the induced chain ergodic?)")


# --- generators -----------------------------------------------------------

def self_loop(reward: float = 1.0, n_states: int = 1) -> Mdp:
    """Deterministic self-loops with a fixed reward (one action)."""
    return Mdp(
        n_states, 1,
        {(s, 0): ((s, 1.0),) for s in range(n_states)},
        {(s, 0, s): ((reward, 1.0),) for s in range(n_states)},
        (False,) * n_states,
    )


def chain(rewards: Sequence[float]) -> Mdp:
    """Deterministic chain ``0 -> 1 -> ... -> n`` with a terminal last state.

    Transition ``i`` pays ``rewards[i]``, so the start state sees the reward
    sequence exactly as given.
    """
    n = len(rewards)
    return Mdp(
        n + 1, 1,
        {(i, 0): ((i + 1, 1.0),) for i in range(n)},
        {(i, 0, i + 1): ((float(r), 1.0),) for i, r in enumerate(rewards)},
        (False,) * n + (True,),
    )


def sparse_chain(R: float, T: int) -> Mdp:
    """Chain whose only non-zero reward ``R`` is the ``(T+1)``-th."""
    return chain([0.0] * T + [R])


def random_mdp(n_states: int, n_actions: int, rng: np.random.Generator, *,
               n_rewards: int = 2, reward_scale: float = 1.0,
               terminate_prob: float | None = None, branching: int | None = None) -> Mdp:
    """Random MDP with finite-support rewards.

    With ``terminate_prob`` set, one extra terminal state is appended and every
    (s, a) reaches it with that probability, making episodes finite.
    """
    n_live = n_states
    S = n_states + (1 if terminate_prob else 0)
    branching = branching or n_live
    transitions, rewards = {}, {}
    for s in range(n_live):
        for a in range(n_actions):
            succ = rng.choice(n_live, size=min(branching, n_live), replace=False)
            w = rng.dirichlet(np.ones(len(succ)))
            if terminate_prob:
                w = w * (1.0 - terminate_prob)
                out = [(int(s2), float(p)) for s2, p in zip(succ, w)]
                out.append((n_live, 1.0 - float(w.sum())))
            else:
                w[-1] = 1.0 - w[:-1].sum()
                out = [(int(s2), float(p)) for s2, p in zip(succ, w)]
            transitions[(s, a)] = tuple(out)
            for s2, _ in out:
                vals = rng.uniform(-reward_scale, reward_scale, size=n_rewards)
                q = rng.dirichlet(np.ones(n_rewards))
                q[-1] = 1.0 - q[:-1].sum()
                rewards[(s, a, s2)] = tuple(zip(vals.tolist(), q.tolist()))
    terminal = (False,) * n_live + ((True,) if terminate_prob else ())
    return Mdp(S, n_actions, transitions, rewards, terminal)


def random_deterministic_chain(length: int, rng: np.random.Generator,
                               reward_scale: float = 5.0) -> Mdp:
    return chain(rng.uniform(-reward_scale, reward_scale, size=length).tolist())


# --- JSON ------------------------------------------------------------------

def mdp_to_dict(mdp: Mdp) -> dict:
    rows = []
    for (s, a), out in sorted(mdp.transitions.items()):
        rows.append({
            "s": s, "a": a,
            "out": [{"s2": s2, "p": p,
                     "rewards": [{"r": r, "p": q} for r, q in mdp.reward_dist(s, a, s2)]}
                    for s2, p in out],
        })
    return {"n_states": mdp.n_states, "n_actions": mdp.n_actions,
            "terminal": list(mdp.terminal), "transitions": rows}


def mdp_from_dict(data: Mapping) -> Mdp:
    try:
        transitions, rewards = {}, {}
        for row in data["transitions"]:
            s, a = int(row["s"]), int(row["a"])
            edges = []
            for e in row["out"]:
                s2 = int(e["s2"])
                edges.append((s2, float(e["p"])))
                if "rewards" in e:
                    rewards[(s, a, s2)] = tuple((float(x["r"]), float(x["p"])) for x in e["rewards"])
            transitions[(s, a)] = tuple(edges)
        return Mdp(int(data["n_states"]), int(data["n_actions"]), transitions, rewards,
                   tuple(bool(t) for t in data["terminal"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed MDP JSON: {exc!r}") from exc


def policy_to_dict(policy: Policy) -> dict:
    return {"probs": [{"s": s, "actions": [{"a": a, "p": p} for a, p in row]}
                      for s, row in sorted(policy.probs.items())]}


def policy_from_dict(data: Mapping) -> Policy:
    try:
        return Policy({int(row["s"]): tuple((int(x["a"]), float(x["p"])) for x in row["actions"])
                       for row in data["probs"]})
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed policy JSON: {exc!r}") from exc
