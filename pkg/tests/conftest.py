import numpy as np
import pytest

from nlbellman.mdp import Mdp, Policy


def brute_force_operator(mdp: Mdp, policy: Policy, f, v):
    """Nested-loop expectation of ``f(r, v(s'))``, independent of the solver's arrays."""
    out = np.zeros(mdp.n_states)
    for s in range(mdp.n_states):
        if mdp.terminal[s]:
            continue
        total = 0.0
        for a, pa in policy.probs[s]:
            for s2, p in mdp.transitions[(s, a)]:
                nxt = 0.0 if mdp.terminal[s2] else v[s2]
                for r, q in mdp.reward_dist(s, a, s2):
                    total += pa * p * q * f(r, nxt)
        out[s] = total
    return out


def two_state_chain(reward=1.0):
    """s0 -> s1 (terminal) with a deterministic reward."""
    return Mdp(2, 1, {(0, 0): ((1, 1.0),)}, {(0, 0, 1): ((reward, 1.0),)}, (False, True))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS = []


@pytest.fixture
def criterion(request):
    """Record a one-line pass/fail verdict for an acceptance criterion."""
    entry = {"name": request.node.name, "ok": False, "detail": ""}
    ACCEPTANCE_RESULTS.append(entry)

    def record(detail):
        entry["detail"] = detail

    yield record
    rep = getattr(request.node, "rep_call", None)
    entry["ok"] = bool(rep and rep.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for e in ACCEPTANCE_RESULTS:
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"[{status}] {e['name']}: {e['detail']}")
