"""``mqdfs`` command-line interface.

Exit status: 0 success, 1 a check failed, 2 usage or input error, 3 I/O
error.  Errors are reported on stderr as one line ``ERROR <code> <message>``.
The output directory defaults to ``$MQDFS_OUTPUT_DIR`` and then to
``./mqdfs_out``; ``--out`` overrides both.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .dfs import FLIP_FLOP_NOTE, LogicalBasis, dfs_report, logical_basis
from .pauli import coherence_decompose, loads
from .sequence import SequenceError, load_sequence
from .simulate import coherence_frequencies, leakage, leakage_convergence, run_sequence
from .spectrum import (
    compare_spectra,
    f1_peaks,
    peak_pick,
    process_2d,
    projection_tsv,
    read_spectrum,
    write_raw,
    write_spectrum,
)
from .spins import ConfigError, T2_LABELS, data_path, load_spin_config

OUTPUT_ENV = "MQDFS_OUTPUT_DIR"
EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, message)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "mqdfs_out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror}") from None


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror}") from None


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v

    return conv


def _t2_override(text: str) -> tuple[str, float]:
    label, sep, value = text.partition("=")
    if not sep or label not in T2_LABELS:
        raise argparse.ArgumentTypeError(f"expected LABEL=SECONDS with LABEL in {', '.join(T2_LABELS)}")
    v = _positive(float)(value)
    return label, v


# dfs-verify --------------------------------------------------------------------


def cmd_dfs_verify(args) -> int:
    families = {"en": ("En",), "em": ("Em",), "all": ("En", "Em")}[args.family]
    if args.basis:
        try:
            ops = tuple(loads(_read_text(p), n=4) for p in args.basis)
        except ValueError as exc:
            raise CliError(EXIT_USAGE, f"basis file: {exc}") from None
        basis = LogicalBasis(ops, convention="custom")
    else:
        basis = logical_basis(args.convention)
    report = dfs_report(basis, families, include_demo=not args.no_demo)
    text = report.to_text()
    _write(_out_dir(args) / "dfs_report.txt", text)
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_CHECK


# simulate -----------------------------------------------------------------------


def _load_inputs(args):
    config = args.config or data_path("alanine.spin")
    seq_path = args.sequence or data_path("alanine_mqjres.seq")
    try:
        system = load_spin_config(config)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {config}: {exc.strerror}") from None
    except ConfigError as exc:
        raise CliError(EXIT_USAGE, f"{config}: {exc}") from None
    try:
        seq = load_sequence(seq_path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {seq_path}: {exc.strerror}") from None
    except SequenceError as exc:
        raise CliError(EXIT_USAGE, f"{seq_path}: {exc}") from None
    if args.t2:
        system = system.with_t2(**dict(args.t2))
    seq = seq.with_acquire(args.t2_points, args.t2_sw)
    if args.ratio:
        try:
            ge, gd = (float(x) for x in args.ratio.split(":"))
        except ValueError:
            raise CliError(EXIT_USAGE, f"--ratio expects GE:GD, got {args.ratio!r}") from None
        if len(seq.gradients()) != 2:
            raise CliError(EXIT_USAGE, "--ratio needs a sequence with two gradients")
        seq = seq.with_gradients(ge, gd)
    return system, seq


def _simulate_once(system, seq, args, inject=None):
    try:
        raw = run_sequence(
            system,
            seq,
            t1_points=args.t1_points,
            t1_sw=args.t1_sw,
            grad_mode=args.grad_mode,
            nz=args.nz,
            z_sampling=args.z_sampling,
            seed=args.seed,
            inject=inject,
            inject_after_encode=args.inject_after_encode,
            workers=args.workers,
        )
    except (KeyError, ValueError) as exc:
        raise CliError(EXIT_USAGE, str(exc).strip("'\"")) from None
    return raw, process_2d(raw, zero_fill=args.zero_fill)


def cmd_simulate(args) -> int:
    system, seq = _load_inputs(args)
    out = _out_dir(args)
    raw, spec = _simulate_once(system, seq, args)
    write_raw(raw, out / "raw")
    write_spectrum(spec, out / "spectrum")
    peaks = peak_pick(spec, args.threshold)
    _write(out / "peaks.tsv", peaks.to_tsv())
    _write(out / "f1_projection.tsv", projection_tsv(spec))

    summary = [
        f"grid {raw.shape[0]} {raw.shape[1]}",
        f"grad_mode {args.grad_mode}",
        f"config_hash {raw.meta['config_hash']}",
        f"sequence_hash {raw.meta['sequence_hash']}",
        "f1_peaks_hz " + " ".join(f"{f:.3f}" for f in f1_peaks(spec, args.threshold)),
    ]
    for label, f in coherence_frequencies(system).items():
        summary.append(f"expected {label} +-{f:.3f}")
    status = EXIT_OK

    if args.grad_mode != "off" and len(seq.gradients()) == 2:
        lk = leakage(system, seq, t1_points=args.t1_points, t1_sw=args.t1_sw, grad_mode=args.grad_mode,
                     nz=args.nz, z_sampling=args.z_sampling, seed=args.seed)
        summary += [f"leakage {k} {v:.3e}" for k, v in lk.items()]
        if args.grad_mode == "ensemble":
            steps = [n for n in (16, 32, 64, 128, 256, 512, 1024, 2048, 4096) if n < args.nz] + [args.nz]
            curve = leakage_convergence(system, seq, steps, z_sampling=args.z_sampling)
            lines = ["nz\tmax_leakage"] + [f"{n}\t{v:.6e}" for n, v in curve]
            _write(out / "leakage.tsv", "\n".join(lines) + "\n")

    if args.inject:
        _, spec_err = _simulate_once(system, seq, args, inject=args.inject)
        write_spectrum(spec_err, out / "spectrum_injected")
        report = compare_spectra(spec, spec_err, args.tol)
        _write(out / "compare.txt", f"NOTE error {args.inject}\n" + report.to_text())
        summary.append(f"inject {args.inject} {'PASS' if report.passed else 'FAIL'} {report.max_rel_diff:.3e}")

    text = "\n".join(summary) + "\n"
    _write(out / "run.txt", text)
    sys.stdout.write(text)
    return status


# decompose ---------------------------------------------------------------------


def cmd_decompose(args) -> int:
    try:
        op = loads(_read_text(args.operator))
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"{args.operator}: {exc}") from None
    weights = None
    if args.weights:
        try:
            weights = [int(x) for x in args.weights.split(",")]
        except ValueError:
            raise CliError(EXIT_USAGE, f"--weights expects comma-separated integers, got {args.weights!r}") from None
    try:
        dec = coherence_decompose(op, weights)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    lines = []
    for q, comp in dec.components.items():
        lines.append(f"ORDER {q}")
        lines.append(comp.dumps().rstrip("\n"))
    zero = dec.get(0)
    if zero is not None and any(set(k) & {"X", "Y"} for k in zero):
        lines.append(f"NOTE {FLIP_FLOP_NOTE}")
    sys.stdout.write("\n".join(line for line in lines if line) + "\n")
    return EXIT_OK


# compare -------------------------------------------------------------------------


def _base(path: str) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".hdr", ".bin", ".tsv") else p


def cmd_compare(args) -> int:
    specs = []
    for path in (args.a, args.b):
        base = _base(path)
        try:
            specs.append(read_spectrum(base))
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {base}: {exc.strerror}") from None
        except (ValueError, KeyError) as exc:
            raise CliError(EXIT_USAGE, f"{base}: {exc}") from None
    try:
        report = compare_spectra(specs[0], specs[1], args.tol)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.passed else EXIT_CHECK


# parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mqdfs", description="Multiple-quantum DFS simulator and verification workbench.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("dfs-verify", help="run the DFS orthogonality/eigenoperator/symmetry suite")
    d.add_argument("--family", choices=("en", "em", "all"), default="all")
    d.add_argument("--basis", nargs=4, metavar="FILE", help="four operator files replacing the built-in basis")
    d.add_argument("--convention", choices=("literal", "symmetrized"), default="literal")
    d.add_argument("--no-demo", action="store_true", help="skip the two-spin warm-up checks")
    d.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./mqdfs_out)")
    d.set_defaults(func=cmd_dfs_verify)

    s = sub.add_parser("simulate", help="run the 2D MQ-JRES simulation")
    s.add_argument("--config", help="spin config file (default: shipped alanine)")
    s.add_argument("--sequence", help="sequence file (default: shipped MQ-JRES)")
    s.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./mqdfs_out)")
    s.add_argument("--t1-points", type=_positive(int), default=64)
    s.add_argument("--t1-sw", type=_positive(float), default=30.0, help="F1 spectral width, Hz")
    s.add_argument("--t2-points", type=_positive(int), help="override the acquire point count")
    s.add_argument("--t2-sw", type=_positive(float), help="override the acquire spectral width, Hz")
    s.add_argument("--grad-mode", choices=("exact", "ensemble", "off"), default="exact")
    s.add_argument("--ratio", help="replace the gradient strengths, GE:GD (e.g. -8:10)")
    s.add_argument("--nz", type=_positive(int), default=1024, help="slices for ensemble mode")
    s.add_argument("--z-sampling", choices=("uniform", "jittered", "random"), default="uniform")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--inject", metavar="LETTERS", help="Pauli error injected before the encode gradient; also writes the comparison")
    s.add_argument("--inject-after-encode", action="store_true", help="place the error after the encode gradient")
    s.add_argument("--tol", type=_positive(float), default=1e-6, help="tolerance for the injection comparison")
    s.add_argument("--threshold", type=float, default=0.05, help="peak threshold, fraction of the maximum")
    s.add_argument("--zero-fill", type=_positive(int), default=4)
    s.add_argument("--t2", action="append", type=_t2_override, metavar="LABEL=SECONDS", help="T2 override")
    s.add_argument("--workers", type=_positive(int), default=os.cpu_count() or 1)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("decompose", help="split an operator file by coherence order")
    c.add_argument("operator", help="file in the '<re> <im> <letters>' format")
    c.add_argument("--weights", help="comma-separated integer weights, one per spin")
    c.set_defaults(func=cmd_decompose)

    m = sub.add_parser("compare", help="compare two spectrum files")
    m.add_argument("a")
    m.add_argument("b")
    m.add_argument("--tol", type=_positive(float), default=1e-6)
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threshold", 0.5) is not None and not 0 < getattr(args, "threshold", 0.5) < 1:
            raise CliError(EXIT_USAGE, "--threshold must lie in (0, 1)")
        return args.func(args)
    except CliError as exc:
        print(f"ERROR {exc.code} {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
