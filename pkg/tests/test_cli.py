import numpy as np
import pytest

from mqdfs.cli import OUTPUT_ENV, main
from mqdfs.dfs import highest_state, logical_basis
from mqdfs.pauli import OperatorSum


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_dfs_verify_default(tmp_path, capsys):
    code, out, _ = run(["dfs-verify", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert sum(ln.startswith("CHECK eigen ") and " PASS " in ln for ln in out.splitlines()) == 32
    assert (tmp_path / "dfs_report.txt").read_text() == out


def test_dfs_verify_em_family(tmp_path, capsys):
    code, out, _ = run(["dfs-verify", "--family", "em", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert sum(ln.startswith("CHECK em_asymmetric") for ln in out.splitlines()) == 144
    assert "CHECK eigen" not in out


def test_corrupted_basis_exits_nonzero(tmp_path, capsys):
    files = []
    for k, rho in enumerate(logical_basis().rho):
        if k == 2:
            rho = rho + OperatorSum(4, {"XEEE": 0.25})
        f = tmp_path / f"rho{k + 1}.op"
        f.write_text(rho.dumps())
        files.append(str(f))
    code, out, _ = run(["dfs-verify", "--basis", *files, "--out", str(tmp_path)], capsys)
    assert code == 1 and " FAIL " in out


def test_output_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "envout"))
    assert run(["dfs-verify", "--family", "en"], capsys)[0] == 0
    assert (tmp_path / "envout" / "dfs_report.txt").exists()


def test_simulate_outputs_and_determinism(tmp_path, capsys):
    args = ["simulate", "--t2-points", "128", "--t1-points", "32"]
    code, out, _ = run(args + ["--out", str(tmp_path / "a")], capsys)
    assert code == 0
    code, _, _ = run(args + ["--out", str(tmp_path / "b"), "--workers", "1"], capsys)
    assert code == 0
    for name in ("raw.bin", "raw.hdr", "spectrum.bin", "spectrum.hdr", "spectrum.tsv", "peaks.tsv", "run.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    peaks = np.loadtxt(tmp_path / "a" / "peaks.tsv", skiprows=1, ndmin=2)
    assert np.any(np.abs(peaks[:, 0] - 5.9) < 0.5) and np.any(np.abs(peaks[:, 0] + 5.9) < 0.5)
    assert "leakage QQ 0.000e+00" in out


def test_simulate_injection_compare(tmp_path, capsys):
    code, out, _ = run(["simulate", "--t2-points", "128", "--t1-points", "16", "--inject", "XXXY",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "CHECK spectra_match PASS" in (tmp_path / "compare.txt").read_text()
    code, out, _ = run(["compare", str(tmp_path / "spectrum"), str(tmp_path / "spectrum_injected.hdr")], capsys)
    assert code == 0 and out.startswith("CHECK spectra_match PASS")


def test_compare_detects_difference(tmp_path, capsys):
    run(["simulate", "--t2-points", "64", "--t1-points", "8", "--out", str(tmp_path / "a")], capsys)
    run(["simulate", "--t2-points", "64", "--t1-points", "8", "--grad-mode", "off", "--out", str(tmp_path / "b")], capsys)
    code, out, _ = run(["compare", str(tmp_path / "a" / "spectrum"), str(tmp_path / "b" / "spectrum")], capsys)
    assert code == 1 and "FAIL" in out


def test_simulate_ensemble_writes_leakage(tmp_path, capsys):
    code, _, _ = run(["simulate", "--t2-points", "64", "--t1-points", "8", "--grad-mode", "ensemble",
                      "--nz", "256", "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = np.loadtxt(tmp_path / "leakage.tsv", skiprows=1)
    assert rows[-1, 0] == 256 and rows[-1, 1] < 1e-3


def test_simulate_overrides(tmp_path, capsys):
    code, out, _ = run(["simulate", "--t2-points", "64", "--t1-points", "4", "--ratio=-8:10",
                        "--t2", "DQ2=0.25", "--out", str(tmp_path)], capsys)
    assert code == 0 and "grid 4 64" in out


def test_decompose(tmp_path, capsys):
    f = tmp_path / "h.op"
    f.write_text(highest_state("literal").dumps())
    code, out, _ = run(["decompose", str(f), "--weights", "4,4,4,1"], capsys)
    orders = {int(ln.split()[1]) for ln in out.splitlines() if ln.startswith("ORDER")}
    assert code == 0 and orders == {-13, -11, -5, -3, 3, 5, 11, 13}
    assert "NOTE" not in out


def test_decompose_identity_and_projector(tmp_path, capsys):
    f = tmp_path / "e.op"
    f.write_text("1 0 EE\n")
    code, out, _ = run(["decompose", str(f)], capsys)
    assert code == 0 and out == "ORDER 0\n1 0 EE\n"
    f.write_text("0.25 0 EE\n-1 0 ZZ\n1 0 XX\n1 0 YY\n")
    code, out, _ = run(["decompose", str(f), "--weights", "1,1"], capsys)
    assert [ln for ln in out.splitlines() if ln.startswith("ORDER")] == ["ORDER 0"]
    assert "NOTE" in out


@pytest.mark.parametrize(
    "argv, code",
    [
        (["decompose", "/nonexistent/file.op"], 3),
        (["simulate", "--nz", "-1"], 2),
        (["nonsense"], 2),
        (["simulate", "--config", "/nonexistent.spin"], 3),
        (["simulate", "--ratio", "abc"], 2),
        (["simulate", "--threshold", "2"], 2),
        (["compare", "/nonexistent/a", "/nonexistent/b"], 3),
    ],
)
def test_error_codes(argv, code, capsys):
    got, _, err = run(argv, capsys)
    assert got == code
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"ERROR {code} ")


def test_bad_operator_and_sequence_files(tmp_path, capsys):
    f = tmp_path / "bad.op"
    f.write_text("1 0 XQ\n")
    assert run(["decompose", str(f)], capsys)[0] == 2
    s = tmp_path / "bad.seq"
    s.write_text("pulse H 90 x\n")
    code, _, err = run(["simulate", "--sequence", str(s), "--out", str(tmp_path)], capsys)
    assert code == 2 and err.startswith("ERROR 2")


def test_help_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--help"])
    assert e.value.code == 0
    assert "--grad-mode" in capsys.readouterr().out
