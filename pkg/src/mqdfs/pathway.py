"""Coherence-pathway selection with pulsed field gradients.

A gradient of area ``g`` gives a component of weighted coherence order ``p``
the phase ``exp(2 pi i p g z)`` at height ``z`` in the sample.  A pathway
that is order ``p_e`` at the encoding gradient and ``p_d`` at the decoding
gradient is refocused only when ``g_e p_e + g_d p_d = 0``.  The exact
filter keeps precisely those pathways.  The ensemble model averages the
phases over a finite set of ``z`` slices, and as the number of slices grows
it converges to the exact filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .dynamics import StateOp
from .pauli import OperatorSum, coherence_decompose


@dataclass(frozen=True)
class GradientEvent:
    """Field-gradient pulse; ``strength`` is the dimensionless area (duration folded in)."""

    strength: float

    def __post_init__(self):
        if not math.isfinite(self.strength):
            raise ValueError("gradient strength must be finite")


@dataclass(frozen=True)
class PathwaySelection:
    encode_orders: frozenset[int]
    detect_order: int


def gradient_filter(state: StateOp, keep: Iterable[int], weights: Sequence[int]) -> StateOp:
    """Drop every weighted-order component not listed in ``keep``."""
    keep = set(keep)
    dec = coherence_decompose(state.operator, weights)
    out = OperatorSum.zero(state.n)
    for q, comp in dec.components.items():
        if q in keep:
            out = out + comp
    return replace(state, operator=out)


def surviving_ratio(ge: GradientEvent, gd: GradientEvent, mq_order: int, det_order: int) -> bool:
    """True iff the encode/decode pair refocuses ``mq_order -> det_order``."""
    total = ge.strength * mq_order + gd.strength * det_order
    scale = max(abs(ge.strength * mq_order), abs(gd.strength * det_order), 1.0)
    return abs(total) <= 1e-12 * scale


def selection_for(ge: GradientEvent, gd: GradientEvent, det_order: int, orders: Iterable[int]) -> PathwaySelection:
    """Encode orders from ``orders`` that the pair refocuses onto ``det_order``."""
    keep = frozenset(p for p in orders if surviving_ratio(ge, gd, p, det_order))
    return PathwaySelection(keep, det_order)


def z_positions(nz: int, sampling: str = "uniform", rng: np.random.Generator | None = None) -> np.ndarray:
    """Slice heights in ``[-1/2, 1/2]``.

    ``uniform`` puts the slices at the midpoints of ``nz`` equal cells;
    ``jittered`` shifts that whole grid by one random offset within a cell;
    ``random`` draws every slice independently.
    """
    if nz < 2:
        raise ValueError("nz must be at least 2")
    cells = -0.5 + (np.arange(nz) + 0.5) / nz
    if sampling == "uniform":
        return cells
    rng = rng if rng is not None else np.random.default_rng(0)
    if sampling == "jittered":
        return cells + (rng.random() - 0.5) / nz
    if sampling == "random":
        return rng.random(nz) - 0.5
    raise ValueError(f"unknown z sampling {sampling!r}")


def phase_average(k: float | np.ndarray, z: np.ndarray) -> np.ndarray:
    """Mean of ``exp(2 pi i k z)`` over the slices ``z`` (``k`` = net phase winding)."""
    k = np.asarray(k, dtype=float)
    return np.exp(2j * np.pi * np.multiply.outer(k, z)).mean(axis=-1)


def ensemble_gradient(
    state: StateOp,
    g: GradientEvent,
    weights: Sequence[int],
    nz: int = 1024,
    sampling: str = "uniform",
    rng: np.random.Generator | None = None,
) -> StateOp:
    """Sample average of one gradient's phase twist over ``nz`` slices."""
    z = z_positions(nz, sampling, rng)
    dec = coherence_decompose(state.operator, weights)
    out = OperatorSum.zero(state.n)
    for q, comp in dec.components.items():
        out = out + comp * complex(phase_average(q * g.strength, z))
    return replace(state, operator=out)


def pathway_weight(
    ge: GradientEvent,
    gd: GradientEvent,
    p_e: float,
    p_d: float,
    mode: str = "exact",
    z: np.ndarray | None = None,
) -> complex:
    """Amplitude with which pathway ``p_e -> p_d`` survives the gradient pair."""
    k = ge.strength * p_e + gd.strength * p_d
    if mode == "exact":
        return 1.0 if abs(k) <= 1e-12 * max(1.0, abs(ge.strength * p_e)) else 0.0
    if mode == "ensemble":
        if z is None:
            raise ValueError("ensemble mode needs slice positions")
        return complex(phase_average(k, z))
    raise ValueError(f"unknown gradient mode {mode!r}")
