import math

import pytest

from mqdfs.dfs import highest_state, mq_coherences
from mqdfs.dynamics import PulseEvent
from mqdfs.pathway import GradientEvent
from mqdfs.pauli import PauliString, embed
from mqdfs.sequence import (
    Acquire,
    Delay,
    ErrorInjection,
    Evolve,
    Expr,
    PrepareIdeal,
    SequenceError,
    core_positions,
    injection_string,
    named_operator,
    parse_sequence,
)
from mqdfs.spins import data_path


def test_single_pulse():
    seq = parse_sequence("pulse H 90 x\nacquire 16 1000 H\n")
    assert seq.events[0] == PulseEvent(("H",), math.pi / 2, 0.0)
    assert seq.acquire == Acquire(16, 1000.0, "H")


def test_all_keywords():
    text = """
    prepare Iz(I) 1/3   # comment
    pulse I,S 90 -y
    delay 1/(4*J(S,I1))
    grad -8
    inject XXXY
    evolve t1/2
    pulse180 H S
    evolve t1/2
    pulse S 45 30
    grad 10
    acquire 64 4000 H
    """
    seq = parse_sequence(text)
    kinds = [type(e) for e in seq.events]
    assert kinds == [PrepareIdeal, PulseEvent, Delay, GradientEvent, ErrorInjection, Evolve,
                     PulseEvent, Evolve, PulseEvent, GradientEvent, Acquire]
    assert seq.events[1].targets == ("I", "S") and seq.events[1].phase == pytest.approx(1.5 * math.pi)
    assert seq.events[5].fraction == 0.5
    assert seq.events[8].phase == pytest.approx(math.radians(30))


def test_delay_expression(alanine):
    seq = parse_sequence("delay 1/(4*J(S,I1))\nacquire 1 1 H\n")
    assert seq.events[0].seconds(alanine) == pytest.approx(1 / (4 * 129.8))
    assert Expr("2**3 - -1").evaluate() == 9


@pytest.mark.parametrize("bad", ["__import__('os')", "J(S)", "x+1", "1 if 1 else 2"])
def test_unsafe_expressions_rejected(bad):
    with pytest.raises(ValueError):
        Expr(bad)


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("pulse H 90\nacquire 1 1 H\n", 1),
        ("\nfrobnicate\nacquire 1 1 H\n", 2),
        ("evolve t2\nacquire 1 1 H\n", 1),
        ("inject XQ\nacquire 1 1 H\n", 1),
        ("acquire 0 1 H\n", 1),
        ("delay 1e-3 2\nacquire 1 1 H\n", 1),
    ],
)
def test_errors_carry_line_numbers(text, lineno):
    with pytest.raises(SequenceError) as err:
        parse_sequence(text)
    assert err.value.lineno == lineno


@pytest.mark.parametrize(
    "text",
    [
        "pulse H 90 x\n",
        "acquire 1 1 H\nacquire 1 1 H\n",
        "acquire 1 1 H\npulse H 90 x\n",
        "grad 1\ngrad 2\ngrad 3\nacquire 1 1 H\n",
        "grad 1\nacquire 1 1 H\n",
        "delay -1\nacquire 1 1 H\n",
    ],
)
def test_invariant_violations(text):
    with pytest.raises(SequenceError):
        parse_sequence(text)


def test_shipped_sequence_structure(shipped_seq):
    assert [g.strength for g in shipped_seq.gradients()] == [-8, 10]
    assert shipped_seq.acquire == Acquire(1024, 4000.0, "H")
    start2, start3 = shipped_seq.part_bounds()
    assert isinstance(shipped_seq.events[start2], GradientEvent)
    assert sum(isinstance(e, Evolve) for e in shipped_seq.events[start2:start3]) == 2


def test_injection_placement(shipped_seq):
    start2 = shipped_seq.part_bounds()[0]
    seq = shipped_seq.with_injection("XXXY")
    assert seq.events[start2] == ErrorInjection(seq.events[start2].error)
    assert isinstance(seq.events[start2 + 1], GradientEvent)
    late = shipped_seq.with_injection("XXXY", after_encode=True)
    assert isinstance(late.events[start2], GradientEvent)
    assert isinstance(late.events[start2 + 1], ErrorInjection)


def test_with_preparation(shipped_seq):
    seq = shipped_seq.with_preparation("QQ")
    assert seq.events[0] == PrepareIdeal("QQ")
    assert isinstance(seq.events[1], GradientEvent)


def test_named_operators(alanine):
    pos = core_positions(alanine)
    assert named_operator("mq_highest", alanine) == embed(highest_state(), pos, 5)
    assert named_operator("DQ1_literal", alanine) == embed(mq_coherences("literal")[1], pos, 5)
    assert named_operator("Iz(I)", alanine).terms == {"EZEEE": 0.5, "EEZEE": 0.5, "EEEZE": 0.5}
    for bad in ("QQ_weird", "rho7", "mq_lowest"):
        with pytest.raises(KeyError):
            named_operator(bad, alanine)


def test_injection_string(alanine):
    # four letters follow (I1, I2, I3, S); the system order is (S, I1, I2, I3, M)
    assert injection_string(PauliString("XXXY"), alanine).letters == "YXXXE"
    assert injection_string(PauliString("ZEEEE"), alanine).letters == "ZEEEE"
    with pytest.raises(SequenceError):
        injection_string(PauliString("XY"), alanine)


def test_nominal_sequence_parses():
    from mqdfs.sequence import load_sequence

    seq = load_sequence(data_path("alanine_mqjres_nominal.seq"))
    delays = [e for e in seq.events if isinstance(e, Delay)]
    assert delays and all(d.seconds() == 0.00194 for d in delays)
