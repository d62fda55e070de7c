"""Time evolution of operator states.

Two independent routes are provided.  The analytic route applies the
commuting product-operator rules term by term and is exact for secular
Hamiltonians; the dense route builds ``exp(-iHt)`` from an eigendecomposition
and serves as the reference.  Pulses and the per-coherence T2 decay have
both a symbolic and a dense form as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable

import numpy as np

from .pauli import (
    OperatorSum,
    PauliString,
    basis_patterns,
    from_matrix,
    ladder_patterns,
    pauli_product,
    to_matrix,
)
from .spins import Hamiltonian, SpinSystem


class UnsupportedGenerator(ValueError):
    """The analytic backend only handles Hamiltonians built from ``E``/``Z`` letters."""


@dataclass(frozen=True)
class StateOp:
    """Density-operator deviation plus the time it has accumulated."""

    operator: OperatorSum
    time: float = 0.0

    @property
    def n(self) -> int:
        return self.operator.n


_AXES = {"x": 0.0, "y": math.pi / 2, "-x": math.pi, "-y": 3 * math.pi / 2}


@dataclass(frozen=True)
class PulseEvent:
    """Ideal hard pulse: rotation by ``angle`` about an axis at ``phase`` in the xy plane."""

    targets: tuple[str, ...]
    angle: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.targets:
            raise ValueError("a pulse needs at least one target")
        if not math.isfinite(self.angle) or not math.isfinite(self.phase):
            raise ValueError("pulse angle and phase must be finite")

    @classmethod
    def from_degrees(cls, targets: Iterable[str], angle_deg: float, axis: str | float = "x"):
        phase = _AXES[axis] if isinstance(axis, str) else float(axis)
        return cls(tuple(targets), math.radians(angle_deg), phase)


def _resolve(system: SpinSystem, targets: Iterable[str]) -> list[int]:
    idx: list[int] = []
    for t in targets:
        for i in system.resolve(t):
            if i not in idx:
                idx.append(i)
    return sorted(idx)


# dense helpers ---------------------------------------------------------------------


def propagator(hmat: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)`` for Hermitian ``H`` via ``eigh``."""
    evals, evecs = np.linalg.eigh(hmat)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def pulse_unitary(n: int, spins: Iterable[int], angle: float, phase: float) -> np.ndarray:
    """Product of single-spin rotations ``exp(-i angle (cos(phase) I_x + sin(phase) I_y))``."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    axis = np.array([[0, np.exp(-1j * phase)], [np.exp(1j * phase), 0]])
    r1 = c * np.eye(2) - 1j * s * axis
    spins = set(spins)
    u = np.eye(1, dtype=complex)
    for k in range(n):
        u = np.kron(u, r1 if k in spins else np.eye(2))
    return u


def evolve_dense(state: StateOp, h: Hamiltonian, t: float) -> StateOp:
    """Reference evolution ``rho -> U rho U^dag`` with ``U = exp(-iHt)``."""
    if t < 0:
        raise ValueError("evolution time must be non-negative")
    if t == 0:
        return state
    u = propagator(to_matrix(h.operator), t)
    rho = to_matrix(state.operator)
    return StateOp(from_matrix(u @ rho @ u.conj().T), state.time + t)


def evolve_analytic(state: StateOp, h: Hamiltonian, t: float) -> StateOp:
    """Product-operator evolution under a secular (all ``E``/``Z``) Hamiltonian.

    Every generator ``h_G G`` commutes with the others, so the propagator
    factorizes.  A term ``P`` that anticommutes with ``G`` maps to
    ``cos(2 h_G t) P - i sin(2 h_G t) G P``; commuting terms are untouched.
    """
    if t < 0:
        raise ValueError("evolution time must be non-negative")
    if not h.is_secular():
        raise UnsupportedGenerator("analytic evolution needs a secular Hamiltonian")
    terms = state.operator.terms
    n = state.n
    for g, hg in h.operator.items():
        if set(g) == {"E"}:
            continue
        theta = 2 * hg.real * t
        c, s = math.cos(theta), math.sin(theta)
        gs = PauliString(g)
        out: dict[str, complex] = {}
        for k, coeff in terms.items():
            if gs.commutes_with(PauliString(k)):
                out[k] = out.get(k, 0) + coeff
                continue
            out[k] = out.get(k, 0) + c * coeff
            ph, prod = pauli_product(gs, PauliString(k))
            out[prod.letters] = out.get(prod.letters, 0) - 1j * s * ph * coeff
        terms = OperatorSum(n, out).terms
    return StateOp(OperatorSum(n, terms), state.time + t)


def _quarter_turns(x: float) -> int | None:
    q = x / (math.pi / 2)
    r = round(q)
    return r % 4 if abs(q - r) < 1e-12 else None


def _rotate_symbolic(op: OperatorSum, spins: list[int], angle: float, phase: float) -> OperatorSum:
    axis_letter, sign = {0: ("X", 1), 1: ("Y", 1), 2: ("X", -1), 3: ("Y", -1)}[_quarter_turns(phase)]
    c = round(math.cos(sign * angle))
    s = round(math.sin(sign * angle))
    terms = op.terms
    for k in spins:
        out: dict[str, complex] = {}
        for letters, coeff in terms.items():
            ch = letters[k]
            if ch in ("E", axis_letter):
                out[letters] = out.get(letters, 0) + coeff
                continue
            if c:
                out[letters] = out.get(letters, 0) + c * coeff
            if s:
                ph, rotated = pauli_product(PauliString(axis_letter), PauliString(ch))
                new = letters[:k] + rotated.letters + letters[k + 1 :]
                out[new] = out.get(new, 0) - 1j * s * ph * coeff
        terms = OperatorSum(op.n, out).terms
    return OperatorSum(op.n, terms)


def apply_pulse(state: StateOp, e: PulseEvent, system: SpinSystem, backend: str = "auto") -> StateOp:
    """Rotate the targeted spins.

    ``backend="auto"`` uses the symbolic letter rotation when the angle and
    the phase are both multiples of 90 degrees, and the dense route otherwise.
    """
    if system.n != state.n:
        raise ValueError(f"state has {state.n} spins but the system has {system.n}")
    spins = _resolve(system, e.targets)
    symbolic_ok = _quarter_turns(e.angle) is not None and _quarter_turns(e.phase) is not None
    if backend == "symbolic" and not symbolic_ok:
        raise ValueError("symbolic pulses need angle and phase in multiples of 90 degrees")
    if backend == "symbolic" or (backend == "auto" and symbolic_ok):
        return replace(state, operator=_rotate_symbolic(state.operator, spins, e.angle, e.phase))
    u = pulse_unitary(state.n, spins, e.angle, e.phase)
    rho = to_matrix(state.operator)
    return replace(state, operator=from_matrix(u @ rho @ u.conj().T))


# relaxation ------------------------------------------------------------------------


def coherence_label(pattern: tuple[int, ...], system: SpinSystem) -> str | None:
    """T2 label for a ladder pattern, or ``None`` for purely longitudinal terms.

    A single transverse spin is ``SQ``.  When exactly the three equivalent
    spins and their partner are transverse the pattern is one of the
    methyl multiplet coherences, classified by the summed group order
    ``a`` and the partner order ``b``: ``|a| = 3`` gives QQ (same sign as
    ``b``) or DQ1 (opposite), ``|a| = 1`` gives DQ2 or ZQ.  Anything else
    falls back to ``default``.
    """
    transverse = [k for k, p in enumerate(pattern) if p]
    if not transverse:
        return None
    if len(transverse) == 1:
        return "SQ"
    try:
        group, partner = system.mq_core()
    except ValueError:
        return "default"
    if set(transverse) != set(group) | {partner}:
        return "default"
    a = sum(pattern[k] for k in group)
    b = pattern[partner]
    same = (a > 0) == (b > 0)
    if abs(a) == 3:
        return "QQ" if same else "DQ1"
    return "DQ2" if same else "ZQ"


def apply_relaxation(state: StateOp, system: SpinSystem, dt: float) -> StateOp:
    """Scale each ladder component by ``exp(-dt / T2(label))``.

    Longitudinal components are left alone (T1 is not modelled).
    """
    if dt < 0:
        raise ValueError("relaxation interval must be non-negative")
    if dt == 0:
        return state
    out = OperatorSum.zero(state.n)
    for pattern, comp in ladder_patterns(state.operator).items():
        label = coherence_label(pattern, system)
        factor = 1.0 if label is None else math.exp(-dt / system.t2(label))
        out = out + comp * factor
    return replace(state, operator=out)


@lru_cache(maxsize=16)
def label_grid(system: SpinSystem) -> np.ndarray:
    """T2 label of every dense matrix element (object array, ``None`` = longitudinal)."""
    pats = basis_patterns(system.n)
    dim = 2**system.n
    grid = np.empty((dim, dim), dtype=object)
    cache: dict[tuple[int, ...], str | None] = {}
    for i in range(dim):
        for j in range(dim):
            p = tuple(pats[i, j])
            if p not in cache:
                cache[p] = coherence_label(p, system)
            grid[i, j] = cache[p]
    return grid


def relaxation_rates(system: SpinSystem) -> np.ndarray:
    """Element-wise decay rate ``1/T2`` matching :func:`apply_relaxation`."""
    grid = label_grid(system)
    rates = np.zeros(grid.shape)
    for label in set(grid.ravel()):
        if label is not None:
            rates[grid == label] = 1.0 / system.t2(label)
    return rates
