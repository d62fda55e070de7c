"""Spin systems, the weak-coupling Hamiltonian and the spin-config format.

Config grammar (one statement per line, ``#`` starts a comment)::

    spin <label> gamma=<int|p/q> shift_hz=<float> [species=<name>]
    j <labelA> <labelB> <hz>
    t2 <QQ|DQ1|DQ2|ZQ|SQ|default> <seconds>

Spins are numbered in the order of their ``spin`` lines.  Pairs without a
``j`` line are uncoupled.  ``species`` defaults to the label with trailing
digits removed (``I2`` -> ``I``).  Every T2 label not given falls back to
``default``, which itself defaults to 0.5 s.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

from .pauli import OperatorSum, product_operator

T2_LABELS = ("QQ", "DQ1", "DQ2", "ZQ", "SQ", "default")
DEFAULT_T2 = 0.5

_LABEL_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


class ConfigError(ValueError):
    """Syntax or validation problem in a spin config; ``lineno`` may be None."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class Spin:
    label: str
    gamma_weight: Fraction = Fraction(1)
    shift: float = 0.0
    species: str = ""

    def __post_init__(self):
        if not _LABEL_RE.match(self.label):
            raise ConfigError(f"invalid spin label {self.label!r}")
        object.__setattr__(self, "gamma_weight", Fraction(self.gamma_weight))
        if self.gamma_weight <= 0:
            raise ConfigError(f"spin {self.label}: gamma_weight must be positive")
        if not math.isfinite(self.shift):
            raise ConfigError(f"spin {self.label}: shift must be finite")
        if not self.species:
            object.__setattr__(self, "species", self.label.rstrip("0123456789") or self.label)


def _complete_t2(t2_map) -> dict[str, float]:
    given = dict(t2_map or {})
    for k in given:
        if k not in T2_LABELS:
            raise ConfigError(f"unknown T2 label {k!r}; expected one of {', '.join(T2_LABELS)}")
    default = float(given.get("default", DEFAULT_T2))
    out = {k: float(given.get(k, default)) for k in T2_LABELS}
    for k, v in out.items():
        if not v > 0 or not math.isfinite(v):
            raise ConfigError(f"T2 for {k} must be positive and finite, got {v}")
    return out


@dataclass(frozen=True)
class SpinSystem:
    """Spin-1/2 nuclei with shifts (Hz), scalar couplings (Hz) and T2 values (s).

    ``couplings`` is a symmetric ``n x n`` table with zero diagonal, stored as
    nested tuples so the system stays hashable.
    """

    spins: tuple[Spin, ...]
    couplings: tuple[tuple[float, ...], ...]
    t2_map: dict[str, float] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        spins = tuple(self.spins)
        object.__setattr__(self, "spins", spins)
        if not spins:
            raise ConfigError("a spin system needs at least one spin")
        labels = [s.label for s in spins]
        if len(set(labels)) != len(labels):
            raise ConfigError("spin labels must be unique")
        j = np.asarray(self.couplings, dtype=float)
        n = len(spins)
        if j.shape != (n, n):
            raise ConfigError(f"coupling table must be {n}x{n}, got {j.shape}")
        if not np.all(np.isfinite(j)):
            raise ConfigError("coupling table has non-finite entries")
        if np.any(np.diag(j) != 0):
            raise ConfigError("coupling table must have zero diagonal")
        if not np.array_equal(j, j.T):
            raise ConfigError("coupling table must be symmetric")
        object.__setattr__(self, "couplings", tuple(tuple(float(x) for x in row) for row in j))
        object.__setattr__(self, "t2_map", _complete_t2(self.t2_map))

    @classmethod
    def build(cls, spins, couplings=None, t2_map=None) -> SpinSystem:
        """Build from ``Spin`` objects and a ``{(a, b): hz}`` coupling dict."""
        spins = tuple(spins)
        index = {s.label: i for i, s in enumerate(spins)}
        j = np.zeros((len(spins), len(spins)))
        for (a, b), hz in (couplings or {}).items():
            if a not in index or b not in index:
                raise ConfigError(f"coupling {a}-{b} names an unknown spin")
            if a == b:
                raise ConfigError(f"self-coupling on {a}")
            j[index[a], index[b]] = j[index[b], index[a]] = hz
        return cls(spins, tuple(map(tuple, j)), t2_map or {})

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.spins)

    def index(self, label: str) -> int:
        for i, s in enumerate(self.spins):
            if s.label == label:
                return i
        raise KeyError(f"unknown spin label {label!r}")

    def coupling(self, a: str, b: str) -> float:
        return self.couplings[self.index(a)][self.index(b)]

    def gamma_weights(self) -> tuple[Fraction, ...]:
        return tuple(s.gamma_weight for s in self.spins)

    def integer_weights(self) -> tuple[int, ...]:
        w = self.gamma_weights()
        if any(x.denominator != 1 for x in w):
            raise ValueError(f"gamma weights {[str(x) for x in w]} are not all integers")
        return tuple(int(x) for x in w)

    def t2(self, label: str) -> float:
        return self.t2_map.get(label, self.t2_map["default"])

    def species_members(self, species: str) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.spins) if s.species == species)

    def resolve(self, token: str) -> tuple[int, ...]:
        """Spin indices named by ``token``.

        A token is an exact label, a species name, or a label prefix whose
        members are ``<prefix><digits>`` (``I`` -> ``I1, I2, I3``).
        """
        if token in self.labels:
            return (self.index(token),)
        members = self.species_members(token)
        if members:
            return members
        pat = re.compile(re.escape(token) + r"\d+$")
        members = tuple(i for i, s in enumerate(self.spins) if pat.match(s.label))
        if not members:
            raise KeyError(f"{token!r} matches no spin, species or label group")
        return members

    def with_t2(self, **overrides: float) -> SpinSystem:
        return SpinSystem(self.spins, self.couplings, {**self.t2_map, **overrides})

    def with_coupling(self, a: str, b: str, hz: float) -> SpinSystem:
        j = np.array(self.couplings)
        i, k = self.index(a), self.index(b)
        j[i, k] = j[k, i] = hz
        return SpinSystem(self.spins, tuple(map(tuple, j)), self.t2_map)

    def equivalent_groups(self) -> list[tuple[int, ...]]:
        """Groups (size >= 2) of magnetically equivalent spins.

        Equivalent means same species, same shift and identical couplings to
        every spin outside the pair.
        """
        j = np.array(self.couplings)
        groups: list[list[int]] = []
        for i in range(self.n):
            for g in groups:
                r = g[0]
                si, sr = self.spins[i], self.spins[r]
                if si.species != sr.species or si.shift != sr.shift:
                    continue
                others = [k for k in range(self.n) if k not in (i, r)]
                if all(j[i, k] == j[r, k] for k in others if k not in g):
                    g.append(i)
                    break
            else:
                groups.append([i])
        return [tuple(g) for g in groups if len(g) > 1]

    def mq_core(self) -> tuple[tuple[int, ...], int]:
        """The three equivalent spins and their heteronuclear partner.

        The partner is the spin of a different species with the largest
        coupling to the group (the carbon of a 13CH3).
        """
        trios = [g for g in self.equivalent_groups() if len(g) == 3]
        if not trios:
            raise ValueError("system has no group of three equivalent spins")
        group = trios[0]
        sp = self.spins[group[0]].species
        cands = [k for k in range(self.n) if k not in group and self.spins[k].species != sp]
        if not cands:
            raise ValueError("no heteronuclear partner for the equivalent group")
        partner = max(cands, key=lambda k: abs(self.couplings[k][group[0]]))
        return group, partner


@dataclass(frozen=True)
class Hamiltonian:
    """Secular spin Hamiltonian in rad/s."""

    operator: OperatorSum

    def is_secular(self) -> bool:
        return all(set(k) <= {"E", "Z"} for k in self.operator)


def build_hamiltonian(system: SpinSystem) -> Hamiltonian:
    """``H = sum_k 2 pi nu_k I_zk + sum_{k<l} 2 pi J_kl I_zk I_zl`` (rad/s).

    Couplings among magnetically equivalent spins are kept; they commute
    with every operator symmetric in those spins and so never show up.
    """
    n = system.n
    h = OperatorSum.zero(n)
    for k, s in enumerate(system.spins):
        if s.shift:
            h = h + product_operator(n, {k: "z"}, 2 * math.pi * s.shift)
    for k in range(n):
        for l in range(k + 1, n):
            jkl = system.couplings[k][l]
            if jkl:
                h = h + product_operator(n, {k: "z", l: "z"}, 2 * math.pi * jkl)
    return Hamiltonian(h)


# config IO ------------------------------------------------------------------------


def _parse_gamma(text: str, lineno: int) -> Fraction:
    try:
        g = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad gamma value {text!r}", lineno) from None
    if g <= 0:
        raise ConfigError("gamma must be positive", lineno)
    return g


def _parse_float(text: str, what: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"bad {what} value {text!r}", lineno) from None
    if not math.isfinite(v):
        raise ConfigError(f"{what} must be finite", lineno)
    return v


def parse_spin_config(text: str) -> SpinSystem:
    """Parse the spin-config text format (see module docstring)."""
    spins: list[Spin] = []
    jvals: dict[tuple[str, str], tuple[float, int]] = {}
    t2: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "spin":
            if len(parts) < 2:
                raise ConfigError("spin needs a label", lineno)
            label = parts[1]
            if any(s.label == label for s in spins):
                raise ConfigError(f"duplicate spin {label!r}", lineno)
            opts: dict[str, str] = {}
            for item in parts[2:]:
                if "=" not in item:
                    raise ConfigError(f"expected key=value, got {item!r}", lineno)
                key, val = item.split("=", 1)
                if key not in ("gamma", "shift_hz", "species"):
                    raise ConfigError(f"unknown key {key!r}", lineno)
                if key in opts:
                    raise ConfigError(f"duplicate key {key!r}", lineno)
                opts[key] = val
            if "gamma" not in opts or "shift_hz" not in opts:
                raise ConfigError("spin needs gamma= and shift_hz=", lineno)
            try:
                spins.append(
                    Spin(
                        label,
                        _parse_gamma(opts["gamma"], lineno),
                        _parse_float(opts["shift_hz"], "shift_hz", lineno),
                        opts.get("species", ""),
                    )
                )
            except ConfigError as exc:
                if exc.lineno is None:
                    raise ConfigError(str(exc), lineno) from None
                raise
        elif kind == "j":
            if len(parts) != 4:
                raise ConfigError("expected 'j <labelA> <labelB> <hz>'", lineno)
            a, b = parts[1], parts[2]
            if a == b:
                raise ConfigError(f"self-coupling on {a}", lineno)
            if (a, b) in jvals:
                raise ConfigError(f"duplicate coupling {a}-{b}", lineno)
            jvals[(a, b)] = (_parse_float(parts[3], "J", lineno), lineno)
        elif kind == "t2":
            if len(parts) != 3:
                raise ConfigError("expected 't2 <label> <seconds>'", lineno)
            if parts[1] not in T2_LABELS:
                raise ConfigError(f"unknown T2 label {parts[1]!r}", lineno)
            if parts[1] in t2:
                raise ConfigError(f"duplicate t2 {parts[1]}", lineno)
            t2[parts[1]] = _parse_float(parts[2], "t2", lineno)
        else:
            raise ConfigError(f"unknown statement {kind!r}", lineno)

    labels = {s.label for s in spins}
    merged: dict[frozenset, float] = {}
    for (a, b), (hz, lineno) in jvals.items():
        for x in (a, b):
            if x not in labels:
                raise ConfigError(f"coupling names unknown spin {x!r}", lineno)
        key = frozenset((a, b))
        if key in merged and merged[key] != hz:
            raise ConfigError(f"coupling table not symmetric: J({a},{b}) given twice with different values", lineno)
        merged[key] = hz
    couplings = {tuple(sorted(k)): v for k, v in merged.items()}
    return SpinSystem.build(spins, couplings, t2)


def format_spin_config(system: SpinSystem) -> str:
    """Serialize ``system`` so that ``parse_spin_config`` reproduces it."""
    lines = []
    for s in system.spins:
        lines.append(
            f"spin {s.label} gamma={s.gamma_weight} shift_hz={s.shift!r} species={s.species}"
        )
    for i in range(system.n):
        for k in range(i + 1, system.n):
            hz = system.couplings[i][k]
            if hz:
                lines.append(f"j {system.spins[i].label} {system.spins[k].label} {hz!r}")
    for label in T2_LABELS:
        lines.append(f"t2 {label} {system.t2_map[label]!r}")
    return "\n".join(lines) + "\n"


def load_spin_config(path) -> SpinSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_spin_config(fh.read())


def data_path(name: str):
    return resources.files("mqdfs") / "data" / name


def preset_alanine() -> SpinSystem:
    """13CH3-12CH fragment of alanine: S (13C), I1-I3 (methyl 1H), M (alpha 1H)."""
    spins = [
        Spin("S", Fraction(1), 0.0, "C"),
        Spin("I1", Fraction(4), 0.0, "H"),
        Spin("I2", Fraction(4), 0.0, "H"),
        Spin("I3", Fraction(4), 0.0, "H"),
        Spin("M", Fraction(4), 0.0, "H"),
    ]
    couplings = {("S", "M"): 4.5}
    for k in ("I1", "I2", "I3"):
        couplings[("S", k)] = 129.8
        couplings[(k, "M")] = 7.3
    return SpinSystem.build(spins, couplings, {})
