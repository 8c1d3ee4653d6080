"""Returns of reward sequences and the sparse-reward ordering check.

For an episode whose only non-zero reward ``R`` arrives as the ``(T+1)``-th
reward, hyperbolic discounting prefers it over an immediate reward ``r``
iff ``R / r > 1 + k T``. The geometric return of hyperbolic-equivalent
transformed rewards, compared against ``r``, induces the same ordering;
:func:`verify_ordering_equivalence` checks this cell by cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .transforms import Kind, TransformSpec, hyperbolic_equivalent_g

BOUNDARY_BAND = 1e-9


def sparse_sequence(R: float, T: int) -> list[float]:
    """Rewards ``(0, ..., 0, R)`` with ``R`` at 0-based index ``T``."""
    return [0.0] * T + [float(R)]


def hyperbolic_return(seq: Sequence[float], k: float) -> float:
    if k <= 0:
        raise ValueError("k must be positive")
    rewards = np.asarray(seq, dtype=float)
    return float(np.sum(rewards / (1.0 + k * np.arange(len(rewards)))))


def transformed_return(seq: Sequence[float], spec: TransformSpec, outer_log: bool = False) -> float:
    """Geometric return of transformed rewards, ``sum_n gamma^n g(R_{n+1})``.

    With ``outer_log`` the sum is wrapped in ``log``; this needs a positive sum.
    """
    if spec.kind is not Kind.REWARD_TRANSFORM:
        raise ValueError("transformed_return needs a reward_transform spec")
    rewards = np.asarray(seq, dtype=float)
    if len(rewards) == 0:
        total = 0.0
    else:
        total = float(np.dot(spec.gamma ** np.arange(len(rewards)),
                             hyperbolic_equivalent_g(spec, rewards)))
    if outer_log:
        if not total > 0:
            raise ValueError(f"log of non-positive return {total!r}")
        return math.log(total)
    return total


def hdtd_chain_value(seq: Sequence[float], k: float) -> float:
    """Start value of a deterministic chain under the HDTD recursion."""
    v = 0.0
    for r in reversed(list(seq)):
        v = (r + v) / (1.0 + k * v)
    return v


def prefers_later(R: float, T: int, r_ref: float, k: float) -> bool:
    return R / r_ref > 1.0 + k * T


def on_boundary(R: float, T: int, r_ref: float, k: float) -> bool:
    return abs(R / r_ref - 1.0 - k * T) < BOUNDARY_BAND


@dataclass(frozen=True)
class OrderingVerdict:
    R: float
    T: int
    g_return: float
    prefers_later_by_G: bool
    prefers_later_by_hyperbolic: bool
    agree: bool
    boundary: bool


def verify_ordering_equivalence(gamma: float, k: float, r_ref: float, R_grid: Iterable[float],
                                T_grid: Iterable[int], outer_log: bool = False
                                ) -> list[OrderingVerdict]:
    """Compare the transformed geometric return against hyperbolic preference on a grid.

    ``prefers_later_by_G`` is ``G_0 > r_ref`` (or ``log G_0 > log r_ref`` with
    ``outer_log``). Cells within the boundary band of ``R / r = 1 + k T`` are
    flagged and carry no agreement claim.
    """
    R_grid, T_grid = list(R_grid), list(T_grid)
    if not R_grid or not T_grid:
        raise ValueError("grids must be non-empty")
    spec = TransformSpec.reward_transform(gamma, k, r_ref)
    reference = math.log(r_ref) if outer_log else r_ref
    out = []
    for R in R_grid:
        for T in T_grid:
            G0 = transformed_return(sparse_sequence(R, T), spec, outer_log=outer_log)
            by_G = G0 > reference
            by_H = prefers_later(R, T, r_ref, k)
            out.append(OrderingVerdict(float(R), int(T), G0, by_G, by_H, by_G == by_H,
                                       on_boundary(R, T, r_ref, k)))
    return out


def agreement_stats(verdicts: Sequence[OrderingVerdict]) -> dict:
    eligible = [v for v in verdicts if not v.boundary]
    agree = sum(v.agree for v in eligible)
    return {
        "cells": len(verdicts),
        "eligible": len(eligible),
        "boundary": len(verdicts) - len(eligible),
        "agree": agree,
        "fraction": agree / len(eligible) if eligible else float("nan"),
    }


def compare_returns(seq: Sequence[float], gamma: float, k: float, r_ref: float = 1.0) -> dict:
    """Hyperbolic, transformed-geometric, and HDTD values of one reward sequence.

    These coincide in ordering only for sparse deterministic rewards; for dense
    sequences the numbers are reported side by side without any claim.
    """
    spec = TransformSpec.reward_transform(gamma, k, r_ref)
    return {
        "hyperbolic": hyperbolic_return(seq, k),
        "transformed": transformed_return(seq, spec),
        "hdtd": hdtd_chain_value(seq, k),
    }
