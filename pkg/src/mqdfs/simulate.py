"""Dense-matrix execution of pulse sequences over a t1 x t2 grid.

The state is a ``2^n x 2^n`` density-matrix deviation.  At the encode
gradient it is split into components tagged by their weighted coherence
order; each tagged component is propagated separately until the decode
gradient, where the pair of gradients weights every matrix element by the
pathway amplitude of its ``(p_e, p_d)`` combination.  Relaxation acts during
``evolve`` periods and during acquisition; pulses and fixed delays are
treated as ideal and lossless.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import PulseEvent, pulse_unitary, relaxation_rates
from .pathway import GradientEvent, phase_average, z_positions
from .pauli import OperatorSum, PauliString, basis_patterns, from_matrix, to_matrix
from .sequence import (
    Acquire,
    Delay,
    ErrorInjection,
    Evolve,
    PrepareIdeal,
    PulseSequence,
    injection_string,
    named_operator,
)
from .spins import SpinSystem, build_hamiltonian, format_spin_config

GRAD_MODES = ("exact", "ensemble", "off")
MQ_FACTORS = {"QQ": (3, 1), "DQ1": (3, -1), "DQ2": (1, 1), "ZQ": (1, -1)}


@dataclass(frozen=True)
class Raw2D:
    """Time-domain grid, rows = t1 increments, columns = t2 points."""

    data: np.ndarray
    dwell_t1: float
    dwell_t2: float
    t1_mode: str = "cosine"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def t1(self) -> np.ndarray:
        return np.arange(self.data.shape[0]) * self.dwell_t1

    @property
    def t2(self) -> np.ndarray:
        return np.arange(self.data.shape[1]) * self.dwell_t2

    def interferogram(self) -> np.ndarray:
        """First t2 point of every increment, normalized to the t1 = 0 value."""
        col = self.data[:, 0]
        if col[0] == 0:
            raise ZeroDivisionError("no signal at t1 = t2 = 0")
        return col / col[0]


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def coherence_signal_model(label: str, t1, system: SpinSystem):
    """``cos(pi (a J_IM + b J_SM) t1) exp(-t1 / T2(label))`` for one MQ coherence.

    ``(a, b)`` is (3, 1) for QQ, (3, -1) for DQ1, (1, 1) for DQ2 and (1, -1)
    for ZQ; ``J_IM`` couples the equivalent group to the remote spin and
    ``J_SM`` couples their partner to it.
    """
    a, b = MQ_FACTORS[label]
    j_im, j_sm = remote_couplings(system)
    t1 = np.asarray(t1, dtype=float)
    return np.cos(np.pi * (a * j_im + b * j_sm) * t1) * np.exp(-t1 / system.t2(label))


def remote_couplings(system: SpinSystem) -> tuple[float, float]:
    """``(J_IM, J_SM)``: couplings of the group and of its partner to the remote spin.

    The remote spin is the one outside the four-spin core with the largest
    coupling to the group.
    """
    group, partner = system.mq_core()
    others = [k for k in range(system.n) if k not in group and k != partner]
    if not others:
        return 0.0, 0.0
    m = max(others, key=lambda k: abs(system.couplings[group[0]][k]))
    return system.couplings[group[0]][m], system.couplings[partner][m]


def coherence_frequencies(system: SpinSystem) -> dict[str, float]:
    """F1 line position in Hz of each MQ coherence, ``(a J_IM + b J_SM) / 2``."""
    j_im, j_sm = remote_couplings(system)
    return {k: abs(a * j_im + b * j_sm) / 2 for k, (a, b) in MQ_FACTORS.items()}


def coherence_orders(system: SpinSystem) -> dict[str, int]:
    """Weighted order magnitude of each MQ coherence (``|a w_I + b w_S|``)."""
    group, partner = system.mq_core()
    w = system.gamma_weights()
    wi, ws = w[group[0]], w[partner]
    out = {}
    for label, (a, b) in MQ_FACTORS.items():
        q = abs(a * wi + b * ws)
        out[label] = int(q) if q.denominator == 1 else float(q)
    return out


# dense engine -----------------------------------------------------------------


class DenseEngine:
    """Matrix kernels for one spin system (secular Hamiltonian assumed)."""

    def __init__(self, system: SpinSystem):
        self.system = system
        self.n = system.n
        hmat = to_matrix(build_hamiltonian(system).operator)
        if np.count_nonzero(hmat - np.diag(np.diag(hmat))):
            raise ValueError("dense engine expects a diagonal (secular) Hamiltonian")
        e = np.diag(hmat).real
        self.freq = e[:, None] - e[None, :]
        self.rates = relaxation_rates(system)
        w = np.array([float(x) for x in system.gamma_weights()])
        self.orders = basis_patterns(self.n) @ w
        self._pulses: dict[tuple, np.ndarray] = {}

    def pulse(self, rho: np.ndarray, e: PulseEvent) -> np.ndarray:
        key = (e.targets, e.angle, e.phase)
        u = self._pulses.get(key)
        if u is None:
            spins = sorted({i for t in e.targets for i in self.system.resolve(t)})
            u = self._pulses[key] = pulse_unitary(self.n, spins, e.angle, e.phase)
        return u @ rho @ u.conj().T

    def evolve(self, rho: np.ndarray, t: float, relax: bool = False) -> np.ndarray:
        if t == 0:
            return rho
        factor = np.exp(-1j * self.freq * t)
        if relax:
            factor = factor * np.exp(-self.rates * t)
        return rho * factor

    def inject(self, rho: np.ndarray, error: PauliString) -> np.ndarray:
        p = to_matrix(OperatorSum(self.n, {injection_string(error, self.system).letters: 1.0}))
        return p @ rho @ p

    def detector(self, species: str) -> np.ndarray:
        """Matrix of ``sum_k I^-_k`` over the detected species."""
        members = self.system.species_members(species)
        if not members:
            raise KeyError(f"no spins of species {species!r} to detect")
        total = OperatorSum.zero(self.n)
        for k in members:
            letters = ["E"] * self.n
            letters[k] = "X"
            x = "".join(letters)
            letters[k] = "Y"
            total = total + OperatorSum(self.n, {x: 0.5, "".join(letters): -0.5j})
        return to_matrix(total)

    def detect_orders(self, species: str) -> set[float]:
        w = self.system.gamma_weights()
        return {float(w[k]) for k in self.system.species_members(species)}

    def fid(self, rho: np.ndarray, acq: Acquire, relax: bool = True) -> np.ndarray:
        """``2 Tr(D rho(t2)) / 2^n`` sampled at the acquisition dwell."""
        d = self.detector(acq.species)
        i, j = np.nonzero(d.T)
        amp = rho[i, j] * d[j, i] * (2.0 / 2**self.n)
        decay = -1j * self.freq[i, j] - (self.rates[i, j] if relax else 0.0)
        t = np.arange(acq.points) / acq.spectral_width
        return amp @ np.exp(np.outer(decay, t))


def initial_matrix(system: SpinSystem) -> np.ndarray:
    """High-field equilibrium deviation ``sum_k w_k I_zk`` (gamma weights)."""
    total = OperatorSum.zero(system.n)
    for k, w in enumerate(system.gamma_weights()):
        letters = ["E"] * system.n
        letters[k] = "Z"
        total = total + OperatorSum(system.n, {"".join(letters): 0.5 * float(w)})
    return to_matrix(total)


@dataclass
class _RunContext:
    engine: DenseEngine
    seq: PulseSequence
    grad_mode: str
    z: np.ndarray | None
    relax: bool


def _execute(ctx: _RunContext, t1: float, split: bool = False):
    """Run every event before the acquisition; returns the final matrix, or the
    per-encode-order matrices when ``split`` is set."""
    eng, system = ctx.engine, ctx.engine.system
    states: dict[float | None, np.ndarray] = {None: initial_matrix(system)}
    grads = [e for e in ctx.seq.events if isinstance(e, GradientEvent)]
    det_orders = eng.detect_orders(ctx.seq.acquire.species)
    encode = None
    for e in ctx.seq.events[:-1]:
        if isinstance(e, PrepareIdeal):
            if encode is not None:
                raise ValueError("prepare must come before the encode gradient")
            op = named_operator(e.name, system) * e.scale.evaluate(system)
            states = {None: to_matrix(op)}
            continue
        if isinstance(e, GradientEvent):
            if ctx.grad_mode == "off":
                continue
            if encode is None:
                encode = e
                states = _split_orders(eng, states[None], e, grads[1], det_orders, ctx.grad_mode)
            else:
                if split:
                    return {p: _decode(eng, {p: m}, encode, e, ctx) for p, m in states.items()}
                states = {None: _decode(eng, states, encode, e, ctx)}
            continue
        for key, m in states.items():
            if isinstance(e, PulseEvent):
                states[key] = eng.pulse(m, e)
            elif isinstance(e, Delay):
                dt = e.seconds(system)
                if dt < 0:
                    raise ValueError("negative delay")
                states[key] = eng.evolve(m, dt)
            elif isinstance(e, Evolve):
                states[key] = eng.evolve(m, e.fraction * t1, relax=ctx.relax)
            elif isinstance(e, ErrorInjection):
                states[key] = eng.inject(m, e.error)
    if split:
        return dict(states)
    return sum(states.values())


def _split_orders(eng, rho, ge, gd, det_orders, mode):
    out = {}
    for p in np.unique(eng.orders[np.abs(rho) > 0]):
        p = float(p)
        if mode == "exact" and not any(abs(ge.strength * p + gd.strength * q) <= 1e-12 * max(1.0, abs(ge.strength * p)) for q in det_orders):
            continue
        out[p] = np.where(eng.orders == p, rho, 0)
    return out


def _decode(eng, states, ge, gd, ctx):
    total = np.zeros_like(eng.orders, dtype=complex)
    for p, m in states.items():
        k = ge.strength * p + gd.strength * eng.orders
        if ctx.grad_mode == "exact":
            w = (np.abs(k) <= 1e-12 * max(1.0, abs(ge.strength * p))).astype(float)
        else:
            uniq, inv = np.unique(k, return_inverse=True)
            w = phase_average(uniq, ctx.z)[inv].reshape(k.shape)
        total = total + m * w
    return total


def _context(system, seq, grad_mode, nz, z_sampling, seed, relax) -> _RunContext:
    if grad_mode not in GRAD_MODES:
        raise ValueError(f"grad_mode must be one of {GRAD_MODES}")
    z = None
    if grad_mode == "ensemble":
        z = z_positions(nz, z_sampling, np.random.default_rng(seed))
    return _RunContext(DenseEngine(system), seq, grad_mode, z, relax)


def _pool_map(fn, items, workers):
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_sequence(
    system: SpinSystem,
    seq: PulseSequence,
    t1_points: int = 64,
    t1_sw: float = 30.0,
    grad_mode: str = "exact",
    nz: int = 1024,
    z_sampling: str = "uniform",
    seed: int = 0,
    inject: PauliString | str | None = None,
    inject_after_encode: bool = False,
    relax: bool = True,
    workers: int | None = None,
) -> Raw2D:
    """Simulate the 2D acquisition.

    Parameters
    ----------
    system, seq
        Spin system and validated sequence.
    t1_points, t1_sw
        Number of t1 increments and the F1 spectral width (dwell ``1/t1_sw``).
    grad_mode
        ``exact`` keeps only refocused pathways, ``ensemble`` averages the
        gradient phases over ``nz`` slices, ``off`` ignores the gradients.
    inject
        Optional error applied at position c, the end of the preparation
        block; ``inject_after_encode`` moves it past the encode gradient.
    workers
        Thread count for the t1 loop; results do not depend on it.
    """
    if t1_points < 1 or t1_sw <= 0:
        raise ValueError("need t1_points >= 1 and t1_sw > 0")
    if inject is not None:
        seq = seq.with_injection(inject, inject_after_encode)
    ctx = _context(system, seq, grad_mode, nz, z_sampling, seed, relax)
    acq = seq.acquire
    t1 = np.arange(t1_points) / t1_sw
    rows = _pool_map(lambda t: ctx.engine.fid(_execute(ctx, t), acq, relax), t1, workers)
    meta = {
        "config_hash": text_hash(format_spin_config(system)),
        "sequence_hash": text_hash(repr(seq.events)),
        "grad_mode": grad_mode,
        "species": acq.species,
    }
    if grad_mode == "ensemble":
        meta.update(nz=nz, z_sampling=z_sampling, seed=seed)
    return Raw2D(np.array(rows), 1.0 / t1_sw, 1.0 / acq.spectral_width, "cosine", meta)


def part1_state(system: SpinSystem, seq: PulseSequence) -> OperatorSum:
    """State at the end of the preparation block (before the encode gradient)."""
    head = PulseSequence(seq.part1() + (seq.acquire,))
    ctx = _context(system, head, "off", 2, "uniform", 0, False)
    return from_matrix(_execute(ctx, 0.0))


def pathway_signals(
    system: SpinSystem,
    seq: PulseSequence,
    t1_points: int = 64,
    t1_sw: float = 30.0,
    grad_mode: str = "exact",
    nz: int = 1024,
    z_sampling: str = "uniform",
    seed: int = 0,
) -> dict[float, np.ndarray]:
    """Raw 2D data contributed by each encode order (tags absent from the
    exact filter contribute nothing and are omitted)."""
    if len(seq.gradients()) != 2 or grad_mode == "off":
        raise ValueError("pathway signals need an encode/decode gradient pair")
    ctx = _context(system, seq, grad_mode, nz, z_sampling, seed, True)
    acq = seq.acquire
    out: dict[float, list[np.ndarray]] = {}
    for t in np.arange(t1_points) / t1_sw:
        for p, m in _execute(ctx, t, split=True).items():
            out.setdefault(p, []).append(ctx.engine.fid(m, acq))
    return {p: np.array(v) for p, v in sorted(out.items())}


def leakage(
    system: SpinSystem,
    seq: PulseSequence,
    selected: str = "DQ2",
    **kwargs,
) -> dict[str, float]:
    """Signal norm of each MQ coherence relative to the ``selected`` one.

    The coherence of an encode tag is read off ``|p_e|`` (see
    :func:`coherence_orders`).  Exact-filter runs give zero for every
    blocked coherence; ensemble runs give the residual of the slice average.
    """
    sig = pathway_signals(system, seq, **kwargs)
    by_order = {v: k for k, v in coherence_orders(system).items()}
    norms = {k: 0.0 for k in MQ_FACTORS}
    for p, data in sig.items():
        label = by_order.get(abs(p))
        if label is not None:
            norms[label] = math.hypot(norms[label], float(np.linalg.norm(data)))
    ref = norms[selected]
    if ref == 0:
        raise ZeroDivisionError(f"no {selected} signal survives the filter")
    return {k: v / ref for k, v in norms.items() if k != selected}


def leakage_convergence(
    system: SpinSystem,
    seq: PulseSequence,
    nz_values: Sequence[int] = (16, 32, 64, 128, 256, 512, 1024),
    selected: str = "DQ2",
    z_sampling: str = "uniform",
    t1_points: int = 8,
) -> list[tuple[int, float]]:
    """Worst ensemble-mode leakage as a function of the slice count."""
    out = []
    for nz in nz_values:
        lk = leakage(system, seq, selected, t1_points=t1_points, grad_mode="ensemble", nz=nz, z_sampling=z_sampling)
        out.append((int(nz), max(lk.values())))
    return out
