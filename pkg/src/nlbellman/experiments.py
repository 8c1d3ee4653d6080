"""Parameter sweeps behind the discount-curve and action-gap figures.

Every sweep is a deterministic function of its arguments and returns a
:class:`SweepResult`, a rectangular table with named axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .mdp import Mdp, Policy
from .returns import agreement_stats, verify_ordering_equivalence
from .solvers import action_values, fixed_point
from .transforms import DiscountFunction, Family, TransformSpec, discount_apply

DEFAULT_GAMMAS = (0.25, 0.5, 0.75, 0.9, 0.99)
DEFAULT_V_GRID = tuple(np.arange(-100, 101) / 10.0)
DEFAULT_P_LIST = (0.05, 0.1, 0.25, 0.5, 1.0)
DEFAULT_GAMMA_GRID = tuple(np.arange(101) / 100.0)
DEFAULT_R_GRID = tuple(0.5 + 0.25 * np.arange(19))
DEFAULT_T_GRID = tuple(range(51))


@dataclass
class SweepResult:
    axes: list[tuple[str, list]]
    cells: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    value_name: str = "value"

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        shape = tuple(len(ticks) for _, ticks in self.axes)
        if self.cells.shape != shape:
            raise ValueError(f"cells have shape {self.cells.shape}, axes imply {shape}")
        if not np.all(np.isfinite(self.cells)):
            raise ValueError("sweep produced non-finite cells")

    @property
    def axis_names(self) -> list[str]:
        return [name for name, _ in self.axes]

    def ticks(self, name: str) -> list:
        return dict(self.axes)[name]

    def series(self, label) -> np.ndarray:
        """Row of a two-axis sweep selected by a tick of the first axis."""
        return self.cells[list(self.axes[0][1]).index(label)]


def curve_label(family: str, gamma: float) -> str:
    return f"{family} gamma={gamma:g}"


def discount_curves(gammas: Sequence[float] = DEFAULT_GAMMAS,
                    v_grid: Sequence[float] = DEFAULT_V_GRID, kappa: float = 1.0) -> SweepResult:
    """Linear ``gamma v`` and power ``g_gamma(v)`` discounts on a value grid.

    Rows alternate linear/power per gamma; linear rows are listed under
    ``metadata["dashed"]`` for plotting.
    """
    if not len(gammas) or not len(v_grid):
        raise ValueError("grids must be non-empty")
    v = np.asarray(v_grid, dtype=float)
    labels, rows, dashed = [], [], []
    for g in gammas:
        for fam in (Family.LINEAR, Family.POWER):
            label = curve_label(fam.value, g)
            labels.append(label)
            rows.append(discount_apply(DiscountFunction(fam, g, kappa), v))
            if fam is Family.LINEAR:
                dashed.append(label)
    return SweepResult(
        [("curve", labels), ("v", v.tolist())], np.vstack(rows),
        {"kappa": kappa, "gammas": list(gammas), "dashed": dashed,
         "title": "Linear (dashed) and power (solid) discounts", "ylabel": "g(v)"},
        value_name="g",
    )


def risk_example_mdp(p: float) -> Mdp:
    """Two-action decision at state 0: ``a`` -> x (state 1), ``b`` -> y (state 2) w.p. p.

    States x and y are absorbing placeholders whose values are supplied by
    the caller; state 3 is the terminal reached when ``b`` fails.
    """
    out_b = ((2, p), (3, 1.0 - p)) if p < 1.0 else ((2, 1.0),)
    transitions = {(0, 0): ((1, 1.0),), (0, 1): out_b}
    for s in (1, 2):
        for a in (0, 1):
            transitions[(s, a)] = ((s, 1.0),)
    return Mdp(4, 2, transitions, {}, (False, False, False, True))


def risk_example_embedded(p: float) -> Mdp:
    """Five-state version where v(x) = 1 and v(y) = 2/p arise as fixed-point values.

    x pays 1 and y pays 2/p on their way to terminal state 4.
    """
    out_b = ((2, p), (3, 1.0 - p)) if p < 1.0 else ((2, 1.0),)
    transitions = {(0, 0): ((1, 1.0),), (0, 1): out_b}
    rewards = {}
    for s, r in ((1, 1.0), (2, 2.0 / p)):
        for a in (0, 1):
            transitions[(s, a)] = ((4, 1.0),)
            rewards[(s, a, 4)] = ((r, 1.0),)
    return Mdp(5, 2, transitions, rewards, (False, False, False, True, True))


def _gap_spec(family: Family, gamma: float, kappa: float) -> TransformSpec:
    if family is Family.LINEAR:
        return TransformSpec.linear_discount(gamma, kappa)
    return TransformSpec.power(gamma, kappa)


def action_gap(p: float, gamma: float, family: Family | str = Family.POWER, kappa: float = 1.0,
               embedded: bool = False) -> float:
    """``q(s, b) - q(s, a)`` for the two-action risk example."""
    family = Family(family)
    spec = _gap_spec(family, gamma, kappa)
    if embedded:
        mdp = risk_example_embedded(p)
        policy = Policy.uniform(mdp)
        v, _ = fixed_point(mdp, policy, spec)
    else:
        mdp = risk_example_mdp(p)
        v = np.array([0.0, 1.0, 2.0 / p, 0.0])
    q = action_values(mdp, None, spec, v)
    return float(q[0, 1] - q[0, 0])


def action_gap_sweep(p_list: Sequence[float] = DEFAULT_P_LIST,
                     gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
                     family: Family | str = Family.POWER, kappa: float = 1.0,
                     embedded: bool = False) -> SweepResult:
    family = Family(family)
    for p in p_list:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {p}")
    for g in gamma_grid:
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {g}")
    cells = [[action_gap(p, g, family, kappa, embedded) for g in gamma_grid] for p in p_list]
    return SweepResult(
        [("p", list(p_list)), ("gamma", list(gamma_grid))], cells,
        {"family": family.value, "kappa": kappa, "embedded": embedded,
         "title": f"Action gaps, {family.value} discounting", "ylabel": "q(s,b) - q(s,a)"},
        value_name="gap",
    )


AGREE, DISAGREE, BOUNDARY = 1.0, 0.0, -1.0


def ordering_grid(gamma: float, k: float, r_ref: float = 1.0,
                  R_grid: Sequence[float] = DEFAULT_R_GRID,
                  T_grid: Sequence[int] = DEFAULT_T_GRID, outer_log: bool = False) -> SweepResult:
    """Agreement map over (R, T): 1 agree, 0 disagree, -1 on the boundary band.

    ``metadata`` carries the agreement fraction over eligible cells; when no
    cell is eligible the fraction is NaN and ``no_eligible_cells`` is set.
    """
    verdicts = verify_ordering_equivalence(gamma, k, r_ref, R_grid, T_grid, outer_log)
    cells = np.array([BOUNDARY if v.boundary else (AGREE if v.agree else DISAGREE)
                      for v in verdicts]).reshape(len(R_grid), len(T_grid))
    stats = agreement_stats(verdicts)
    return SweepResult(
        [("R", list(R_grid)), ("T", list(T_grid))], cells,
        {"gamma": gamma, "k": k, "r_ref": r_ref, "outer_log": outer_log,
         "agreement_fraction": stats["fraction"], "eligible": stats["eligible"],
         "boundary_count": stats["boundary"],
         "prefer_later_cells": sum(v.prefers_later_by_hyperbolic for v in verdicts),
         "no_eligible_cells": stats["eligible"] == 0},
        value_name="agree",
    )
