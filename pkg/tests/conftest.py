import functools

import pytest

from mqdfs.sequence import load_sequence
from mqdfs.spins import data_path, preset_alanine

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def alanine():
    return preset_alanine()


@pytest.fixture(scope="session")
def shipped_seq():
    return load_sequence(data_path("alanine_mqjres.seq"))


@functools.lru_cache(maxsize=None)
def cached_run(grad_mode="exact", inject=None, t2_points=1024, nz=1024, prep=None):
    from mqdfs.simulate import run_sequence
    from mqdfs.spectrum import process_2d

    seq = load_sequence(data_path("alanine_mqjres.seq")).with_acquire(t2_points)
    if prep:
        seq = seq.with_preparation(prep)
    raw = run_sequence(preset_alanine(), seq, grad_mode=grad_mode, inject=inject, nz=nz)
    return raw, process_2d(raw)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
