from fractions import Fraction

import numpy as np
import pytest

from mqdfs.pauli import PAULI_MATRICES, to_matrix
from mqdfs.spins import (
    ConfigError,
    Spin,
    SpinSystem,
    build_hamiltonian,
    data_path,
    format_spin_config,
    load_spin_config,
    parse_spin_config,
)


def test_shipped_config_matches_preset(alanine):
    assert load_spin_config(data_path("alanine.spin")) == alanine
    assert alanine.labels == ("S", "I1", "I2", "I3", "M")


def test_config_roundtrip(alanine):
    sys2 = alanine.with_t2(QQ=0.3, ZQ=0.9)
    again = parse_spin_config(format_spin_config(sys2))
    assert again == sys2 and again.t2_map == sys2.t2_map


def test_alanine_constants(alanine):
    assert alanine.coupling("S", "I2") == 129.8
    assert alanine.coupling("M", "I3") == 7.3
    assert alanine.coupling("S", "M") == 4.5
    assert alanine.integer_weights() == (1, 4, 4, 4, 4)


def test_groups_and_core(alanine):
    assert alanine.equivalent_groups() == [(1, 2, 3)]
    assert alanine.mq_core() == ((1, 2, 3), 0)


def test_resolve(alanine):
    assert alanine.resolve("I") == (1, 2, 3)
    assert alanine.resolve("H") == (1, 2, 3, 4)
    assert alanine.resolve("M") == (4,)
    with pytest.raises(KeyError):
        alanine.resolve("Q")


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("spin A gamma=1 shift_hz=0\nspin A gamma=1 shift_hz=0\n", 2),
        ("spin A gamma=1 shift_hz=0 colour=red\n", 1),
        ("spin A gamma=1 shift_hz=0\n\nj A B 3\n", 3),
        ("spin A gamma=1 shift_hz=0\nt2 XQ 1\n", 2),
        ("spin A gamma=0 shift_hz=0\n", 1),
        ("bogus\n", 1),
        ("spin A gamma=1 shift_hz=0\nspin B gamma=1 shift_hz=0\nj A B 3\nj B A 4\n", 4),
    ],
)
def test_config_errors_carry_line(text, lineno):
    with pytest.raises(ConfigError) as err:
        parse_spin_config(text)
    assert err.value.lineno == lineno


def test_fractional_gamma():
    s = parse_spin_config("spin N gamma=1/10 shift_hz=0\n")
    assert s.gamma_weights() == (Fraction(1, 10),)
    with pytest.raises(ValueError):
        s.integer_weights()


def test_hamiltonian_matches_hand_built():
    sys2 = SpinSystem.build([Spin("A", 1, 12.0), Spin("B", 1, -5.0)], {("A", "B"): 7.0})
    z, e = PAULI_MATRICES["Z"] / 2, np.eye(2)
    ref = 2 * np.pi * (12 * np.kron(z, e) - 5 * np.kron(e, z) + 7 * np.kron(z, z))
    np.testing.assert_allclose(to_matrix(build_hamiltonian(sys2).operator), ref, atol=1e-12)
    assert build_hamiltonian(sys2).is_secular()


def test_bad_coupling_table():
    with pytest.raises(ConfigError):
        SpinSystem((Spin("A"), Spin("B")), ((0, 1), (2, 0)))


def test_t2_defaults(alanine):
    assert alanine.t2("QQ") == alanine.t2("default") == 0.5
