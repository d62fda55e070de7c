"""Line-oriented pulse-sequence language.

::

    prepare <name> [scale]            # replace the state by a named operator
    pulse <targets> <angle_deg> <x|y|-x|-y|phase_deg>
    pulse180 <target> [<target> ...]  # 180 x on every listed target
    delay <seconds|expr>
    grad <strength>                   # first = encode, second = decode
    evolve t1/2                       # free evolution for a fraction of t1
    inject <pauli-letters>            # error operator applied by conjugation
    acquire <points> <sw_hz> <species>

Targets are spin labels, species names or label groups (``I`` for
``I1..I3``); several may be joined with commas.  Delay and scale
expressions accept numbers, ``+ - * / **``, parentheses and ``J(A,B)``, the
coupling in Hz between two spins of the system the sequence runs on.

Operator names for ``prepare``: ``Iz(<targets>)``, ``Ix(...)``, ``Iy(...)``
(summed magnetization), ``mq_highest`` (8 IxIyIySy), ``QQ``, ``DQ1``,
``DQ2``, ``ZQ``, ``mq_equal`` (the four at unit norm each) and
``rho1``..``rho4``.  Suffix ``_literal`` selects the
printed-string reading of the four-spin operators; the default is the
proton-symmetrized reading.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass
from typing import Union

from .dfs import highest_state, logical_basis, mq_coherences, MQ_LABELS
from .dynamics import PulseEvent
from .pathway import GradientEvent
from .pauli import LETTERS, OperatorSum, PauliString, embed, product_operator
from .spins import SpinSystem


class SequenceError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


# expressions ----------------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


@dataclass(frozen=True)
class Expr:
    """Arithmetic expression, evaluated lazily against a spin system."""

    text: str

    def __post_init__(self):
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError:
            raise ValueError(f"cannot parse expression {self.text!r}") from None
        _validate(tree.body)

    def evaluate(self, system: SpinSystem | None = None) -> float:
        return float(_eval(ast.parse(self.text, mode="eval").body, system))

    def is_constant(self) -> bool:
        return "J" not in {n.id for n in ast.walk(ast.parse(self.text, mode="eval")) if isinstance(n, ast.Name)}


def _validate(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _validate(node.left)
        _validate(node.right)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _validate(node.operand)
        return
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id == "J"
        and len(node.args) == 2
        and not node.keywords
        and all(isinstance(a, ast.Name) for a in node.args)
    ):
        return
    raise ValueError(f"unsupported expression element {ast.dump(node)}")


def _eval(node, system):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, system), _eval(node.right, system))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, system)
        return -v if isinstance(node.op, ast.USub) else v
    if system is None:
        raise ValueError("J(...) needs a spin system")
    a, b = (arg.id for arg in node.args)
    return system.coupling(a, b)


# events -------------------------------------------------------------------------


@dataclass(frozen=True)
class Delay:
    duration: Expr

    def seconds(self, system: SpinSystem | None = None) -> float:
        return self.duration.evaluate(system)


@dataclass(frozen=True)
class Evolve:
    """Free evolution for ``fraction * t1``."""

    fraction: float


@dataclass(frozen=True)
class ErrorInjection:
    error: PauliString


@dataclass(frozen=True)
class PrepareIdeal:
    name: str
    scale: Expr = Expr("1")


@dataclass(frozen=True)
class Acquire:
    points: int
    spectral_width: float
    species: str


Event = Union[PulseEvent, Delay, GradientEvent, Evolve, ErrorInjection, PrepareIdeal, Acquire]


@dataclass(frozen=True)
class PulseSequence:
    events: tuple[Event, ...]

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        acq = [i for i, e in enumerate(events) if isinstance(e, Acquire)]
        if len(acq) != 1:
            raise SequenceError(f"expected exactly one acquire, found {len(acq)}")
        if acq[0] != len(events) - 1:
            raise SequenceError("acquire must be the last event")
        grads = [e for e in events if isinstance(e, GradientEvent)]
        if len(grads) > 2:
            raise SequenceError("at most one encode and one decode gradient are allowed")
        if len(grads) == 1:
            raise SequenceError("a gradient needs a partner: give both encode and decode")
        for e in events:
            if isinstance(e, Delay) and e.duration.is_constant() and e.seconds() < 0:
                raise SequenceError("delays must be non-negative")

    @property
    def acquire(self) -> Acquire:
        return self.events[-1]

    def gradients(self) -> tuple[GradientEvent, ...]:
        return tuple(e for e in self.events if isinstance(e, GradientEvent))

    def part_bounds(self) -> tuple[int, int]:
        """Indices ``(start2, start3)``: part 2 runs from the encode gradient (or
        the first evolve) through the last evolve."""
        idx_grad = [i for i, e in enumerate(self.events) if isinstance(e, GradientEvent)]
        idx_evo = [i for i, e in enumerate(self.events) if isinstance(e, Evolve)]
        start2 = idx_grad[0] if idx_grad else (idx_evo[0] if idx_evo else len(self.events) - 1)
        start3 = idx_evo[-1] + 1 if idx_evo else start2
        return start2, max(start3, start2)

    def part1(self) -> tuple[Event, ...]:
        return self.events[: self.part_bounds()[0]]

    def with_injection(self, error: PauliString | str, after_encode: bool = False) -> PulseSequence:
        """Copy with an error inserted at position c.

        Position c is the end of the preparation block, just before the
        encode gradient.  ``after_encode`` puts it right after that gradient
        instead; there a non-diagonal error reverses the coherence orders of
        the encoded pathway, so the decode gradient no longer selects the
        same signal.
        """
        error = error if isinstance(error, PauliString) else PauliString(error)
        events = list(self.events)
        idx = [i for i, e in enumerate(events) if isinstance(e, GradientEvent)]
        if idx:
            pos = idx[0] + 1 if after_encode else idx[0]
        else:
            pos = self.part_bounds()[0]
        events.insert(pos, ErrorInjection(error))
        return PulseSequence(tuple(events))

    def with_preparation(self, name: str, scale: str = "1") -> PulseSequence:
        """Replace the preparation block by an ideal ``prepare <name>``."""
        return PulseSequence((PrepareIdeal(name, Expr(scale)),) + self.events[self.part_bounds()[0] :])

    def with_gradients(self, ge: float, gd: float) -> PulseSequence:
        it = iter((GradientEvent(ge), GradientEvent(gd)))
        return PulseSequence(tuple(next(it) if isinstance(e, GradientEvent) else e for e in self.events))

    def with_acquire(self, points: int | None = None, spectral_width: float | None = None) -> PulseSequence:
        acq = self.acquire
        new = Acquire(points or acq.points, spectral_width or acq.spectral_width, acq.species)
        return PulseSequence(self.events[:-1] + (new,))


# parsing -----------------------------------------------------------------------

_AXIS_WORDS = {"x": 0.0, "y": 90.0, "-x": 180.0, "-y": 270.0}
_FRACTION_RE = re.compile(r"^t1(?:/(\d+))?$")


def _expr(text: str, lineno: int) -> Expr:
    try:
        return Expr(text)
    except ValueError as exc:
        raise SequenceError(str(exc), lineno) from None


def _number(text: str, what: str, lineno: int, kind=float):
    try:
        v = kind(text)
    except ValueError:
        raise SequenceError(f"bad {what} {text!r}", lineno) from None
    if isinstance(v, float) and not math.isfinite(v):
        raise SequenceError(f"{what} must be finite", lineno)
    return v


def _targets(tokens: list[str]) -> tuple[str, ...]:
    out: list[str] = []
    for tok in tokens:
        out.extend(t for t in tok.split(",") if t)
    return tuple(out)


def parse_sequence(text: str) -> PulseSequence:
    """Parse sequence text; errors carry the offending line number."""
    events: list[Event] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kw, *args = line.split()
        if kw == "pulse":
            if len(args) != 3:
                raise SequenceError("expected 'pulse <targets> <angle_deg> <axis>'", lineno)
            angle = _number(args[1], "angle", lineno)
            axis = args[2].lower()
            phase_deg = _AXIS_WORDS[axis] if axis in _AXIS_WORDS else _number(axis, "phase", lineno)
            events.append(PulseEvent(_targets(args[:1]), math.radians(angle), math.radians(phase_deg)))
        elif kw == "pulse180":
            if not args:
                raise SequenceError("pulse180 needs at least one target", lineno)
            events.append(PulseEvent(_targets(args), math.pi, 0.0))
        elif kw == "delay":
            if len(args) != 1:
                raise SequenceError("expected 'delay <seconds|expr>' (no spaces inside the expression)", lineno)
            events.append(Delay(_expr(args[0], lineno)))
        elif kw == "grad":
            if len(args) != 1:
                raise SequenceError("expected 'grad <strength>'", lineno)
            events.append(GradientEvent(_number(args[0], "gradient strength", lineno)))
        elif kw == "evolve":
            m = _FRACTION_RE.match(args[0]) if len(args) == 1 else None
            if not m:
                raise SequenceError("expected 'evolve t1' or 'evolve t1/<k>'", lineno)
            events.append(Evolve(1.0 / int(m.group(1)) if m.group(1) else 1.0))
        elif kw == "inject":
            if len(args) != 1 or any(c not in LETTERS for c in args[0]):
                raise SequenceError("expected 'inject <letters from EXYZ>'", lineno)
            events.append(ErrorInjection(PauliString(args[0])))
        elif kw == "prepare":
            if len(args) not in (1, 2):
                raise SequenceError("expected 'prepare <name> [scale]'", lineno)
            scale = _expr(args[1], lineno) if len(args) == 2 else Expr("1")
            events.append(PrepareIdeal(args[0], scale))
        elif kw == "acquire":
            if len(args) != 3:
                raise SequenceError("expected 'acquire <points> <sw_hz> <species>'", lineno)
            points = _number(args[0], "point count", lineno, int)
            sw = _number(args[1], "spectral width", lineno)
            if points < 1 or sw <= 0:
                raise SequenceError("acquire needs points >= 1 and sw > 0", lineno)
            events.append(Acquire(points, sw, args[2]))
        else:
            raise SequenceError(f"unknown keyword {kw!r}", lineno)
    try:
        return PulseSequence(tuple(events))
    except SequenceError as exc:
        raise SequenceError(str(exc), None) from None


def load_sequence(path) -> PulseSequence:
    with open(path, encoding="utf-8") as fh:
        return parse_sequence(fh.read())


# named operators ---------------------------------------------------------------

_MAG_RE = re.compile(r"^I([xyz])\((.+)\)$")


def core_positions(system: SpinSystem) -> tuple[int, ...]:
    """System indices of ``(I1, I2, I3, S)`` in the four-spin DFS ordering."""
    group, partner = system.mq_core()
    return tuple(group) + (partner,)


def named_operator(name: str, system: SpinSystem) -> OperatorSum:
    """Operator for a ``prepare`` name, embedded in ``system``."""
    m = _MAG_RE.match(name)
    if m:
        axis, targets = m.groups()
        idx = sorted({i for t in _targets([targets]) for i in system.resolve(t)})
        total = OperatorSum.zero(system.n)
        for i in idx:
            total = total + product_operator(system.n, {i: axis})
        return total
    base, _, suffix = name.partition("_")
    conv = {"": "symmetrized", "literal": "literal"}.get(suffix)
    if name == "mq_highest" or name == "mq_highest_literal":
        op4 = highest_state("literal" if name.endswith("literal") else "symmetrized")
    elif name == "mq_equal":
        op4 = OperatorSum.zero(4)
        for op in mq_coherences("symmetrized"):
            op4 = op4 + op / op.norm()
    elif conv and base in MQ_LABELS:
        op4 = mq_coherences(conv)[MQ_LABELS.index(base)]
    elif conv and re.fullmatch(r"rho[1-4]", base):
        op4 = logical_basis(conv).rho[int(base[3]) - 1]
    else:
        raise KeyError(f"unknown operator {name!r}")
    return embed(op4, core_positions(system), system.n)


def injection_string(error: PauliString, system: SpinSystem) -> PauliString:
    """Map an error onto the system: four letters use the ``(I1, I2, I3, S)`` order."""
    if error.n == system.n:
        return error
    if error.n == 4:
        letters = ["E"] * system.n
        for pos, ch in zip(core_positions(system), error.letters):
            letters[pos] = ch
        return PauliString("".join(letters))
    raise SequenceError(f"error {error.letters} has {error.n} letters; expected 4 or {system.n}")
