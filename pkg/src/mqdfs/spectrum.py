"""2D processing, peak picking, spectrum comparison and grid file IO."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .simulate import Raw2D

GRID_FORMAT = "mqdfs-grid 1"


@dataclass(frozen=True)
class Spectrum2D:
    """Magnitude spectrum; rows follow ``f1`` and columns follow ``f2`` (Hz)."""

    magnitude: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.magnitude.shape != (len(self.f1), len(self.f2)):
            raise ValueError("axis lengths do not match the grid")

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape

    def f1_projection(self) -> np.ndarray:
        """Skyline projection onto F1 (maximum over F2)."""
        return self.magnitude.max(axis=1)


def cosine_window(n: int) -> np.ndarray:
    """Quarter-period cosine, 1 at the first point and tending to 0 at the end."""
    return np.cos(0.5 * np.pi * np.arange(n) / n)


def fft_t2(data: np.ndarray) -> np.ndarray:
    """Unitary FFT along t2, shifted so frequencies ascend.

    The detected signal is the expectation of ``I^-``, which precesses as
    ``exp(-i omega t)`` for a positive shift; that component lands at
    ``+omega``.
    """
    return np.fft.fftshift(np.fft.ifft(data, axis=-1, norm="ortho"), axes=-1)


def freq_axis(n: int, dwell: float) -> np.ndarray:
    return np.fft.fftshift(np.fft.fftfreq(n, dwell))


def cosine_transform_t1(data: np.ndarray, dwell: float, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    """Cosine transform of amplitude-modulated t1 data onto an ``n_out`` grid.

    The first increment is halved so that a constant maps to a single line.
    """
    n = data.shape[0]
    f = freq_axis(n_out, dwell)
    t = np.arange(n) * dwell
    kernel = np.cos(2 * np.pi * np.outer(f, t))
    kernel[:, 0] *= 0.5
    return kernel @ data, f


def process_2d(raw: Raw2D, zero_fill: int = 4, window: str = "cosine") -> Spectrum2D:
    """Window both axes, FFT t2, cosine-transform t1 with zero-filling, take magnitudes."""
    if zero_fill < 1:
        raise ValueError("zero_fill must be >= 1")
    data = np.asarray(raw.data, dtype=complex)
    n1, n2 = data.shape
    if window == "cosine":
        data = data * cosine_window(n1)[:, None] * cosine_window(n2)[None, :]
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    spec_t2 = fft_t2(data)
    spec, f1 = cosine_transform_t1(spec_t2, raw.dwell_t1, zero_fill * n1)
    meta = dict(raw.meta)
    meta.update(window=window, zero_fill=zero_fill)
    return Spectrum2D(np.abs(spec), f1, freq_axis(n2, raw.dwell_t2), meta)


# peaks -------------------------------------------------------------------------


@dataclass(frozen=True)
class Peak:
    f1: float
    f2: float
    amplitude: float


@dataclass(frozen=True)
class PeakList:
    entries: tuple[Peak, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def f1_values(self, decimals: int = 1) -> list[float]:
        """Distinct F1 positions, rounded."""
        return sorted({round(p.f1, decimals) for p in self.entries})

    def to_tsv(self) -> str:
        lines = ["f1_hz\tf2_hz\tamplitude"]
        lines += [f"{p.f1:.6f}\t{p.f2:.6f}\t{p.amplitude:.6e}" for p in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> PeakList:
        rows = [ln.split("\t") for ln in text.splitlines()[1:] if ln.strip()]
        return cls(tuple(Peak(float(a), float(b), float(c)) for a, b, c in rows))


def _parabolic(ym: float, y0: float, yp: float) -> float:
    den = ym - 2 * y0 + yp
    return 0.0 if den == 0 else 0.5 * (ym - yp) / den


def _local_maxima(grid: np.ndarray) -> np.ndarray:
    padded = np.pad(grid, 1, constant_values=-np.inf)
    r, c = grid.shape
    is_max = np.ones(grid.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            nb = padded[1 + di : 1 + di + r, 1 + dj : 1 + dj + c]
            # ties resolve toward the first element in row-major order
            is_max &= grid > nb if (di, dj) < (0, 0) else grid >= nb
    return is_max


def peak_pick(spec: Spectrum2D, threshold_fraction: float = 0.05) -> PeakList:
    """Local maxima above ``threshold_fraction`` of the global maximum.

    Positions are refined by a parabola through each maximum and its two
    neighbours along each axis; amplitudes are bin values over the global
    maximum.
    """
    if not 0 < threshold_fraction < 1:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    g = spec.magnitude
    top = g.max() if g.size else 0.0
    if top <= 0:
        return PeakList(())
    mask = _local_maxima(g) & (g >= threshold_fraction * top)
    df1 = spec.f1[1] - spec.f1[0] if len(spec.f1) > 1 else 0.0
    df2 = spec.f2[1] - spec.f2[0] if len(spec.f2) > 1 else 0.0
    peaks = []
    for i, j in zip(*np.nonzero(mask)):
        d1 = _parabolic(g[i - 1, j], g[i, j], g[i + 1, j]) if 0 < i < g.shape[0] - 1 else 0.0
        d2 = _parabolic(g[i, j - 1], g[i, j], g[i, j + 1]) if 0 < j < g.shape[1] - 1 else 0.0
        peaks.append(Peak(float(spec.f1[i] + d1 * df1), float(spec.f2[j] + d2 * df2), float(g[i, j] / top)))
    peaks.sort(key=lambda p: (-p.amplitude, p.f1, p.f2))
    return PeakList(tuple(peaks))


def peak_pick_1d(y: np.ndarray, axis: np.ndarray, threshold_fraction: float = 0.05) -> list[tuple[float, float]]:
    """``(position, relative height)`` of 1D local maxima, tallest first."""
    y = np.asarray(y, dtype=float)
    top = y.max()
    if top <= 0:
        return []
    step = axis[1] - axis[0]
    out = []
    for k in range(len(y)):
        left = y[k - 1] if k > 0 else -np.inf
        right = y[k + 1] if k < len(y) - 1 else -np.inf
        if y[k] > left and y[k] >= right and y[k] >= threshold_fraction * top:
            d = _parabolic(left, y[k], right) if 0 < k < len(y) - 1 else 0.0
            out.append((float(axis[k] + d * step), float(y[k] / top)))
    out.sort(key=lambda p: -p[1])
    return out


def f1_peaks(spec: Spectrum2D, threshold_fraction: float = 0.05) -> list[float]:
    """F1 peak positions of the skyline projection, ascending."""
    return sorted(p for p, _ in peak_pick_1d(spec.f1_projection(), spec.f1, threshold_fraction))


# comparison --------------------------------------------------------------------


@dataclass(frozen=True)
class CompareReport:
    max_rel_diff: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_diff <= self.tol

    def to_text(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"CHECK spectra_match {status} max_rel_diff={self.max_rel_diff:.3e} tol={self.tol:.1e}\n"


def compare_spectra(a: Spectrum2D, b: Spectrum2D, tol: float = 1e-6) -> CompareReport:
    """Largest magnitude difference relative to the larger spectrum's maximum."""
    if a.shape != b.shape or not (np.allclose(a.f1, b.f1) and np.allclose(a.f2, b.f2)):
        raise ValueError("spectra are on different grids")
    scale = max(a.magnitude.max(initial=0.0), b.magnitude.max(initial=0.0))
    diff = float(np.abs(a.magnitude - b.magnitude).max(initial=0.0))
    return CompareReport(diff / scale if scale > 0 else diff, tol)


# file IO -----------------------------------------------------------------------


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in v)


def _write_grid(base: Path, kind: str, values: np.ndarray, axes: dict, meta: dict, complex_data: bool):
    base = Path(base)
    arr = np.ascontiguousarray(values)
    if complex_data:
        arr = np.stack([arr.real, arr.imag], axis=-1)
    arr.astype("<f8").tofile(base.with_suffix(".bin"))
    lines = [
        f"format {GRID_FORMAT}",
        f"kind {kind}",
        "dtype float64-le",
        "layout row-major" + (" interleaved-complex" if complex_data else ""),
        f"dims {values.shape[0]} {values.shape[1]}",
    ]
    lines += [f"axis {name} {_fmt_vec(vec)}" for name, vec in axes.items()]
    lines += [f"meta {k} {meta[k]}" for k in sorted(meta)]
    base.with_suffix(".hdr").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_header(base: Path) -> dict:
    hdr: dict = {"axes": {}, "meta": {}}
    for line in Path(base).with_suffix(".hdr").read_text(encoding="utf-8").splitlines():
        key, _, rest = line.partition(" ")
        if key == "axis":
            name, _, vals = rest.partition(" ")
            hdr["axes"][name] = np.array([float(x) for x in vals.split()])
        elif key == "meta":
            name, _, val = rest.partition(" ")
            hdr["meta"][name] = val
        else:
            hdr[key] = rest
    if hdr.get("format") != GRID_FORMAT:
        raise ValueError(f"{base}: not a {GRID_FORMAT} header")
    return hdr


def _read_values(base: Path, hdr: dict) -> np.ndarray:
    dims = tuple(int(x) for x in hdr["dims"].split())
    flat = np.fromfile(Path(base).with_suffix(".bin"), dtype="<f8")
    if "interleaved-complex" in hdr["layout"]:
        pairs = flat.reshape(dims + (2,))
        return pairs[..., 0] + 1j * pairs[..., 1]
    return flat.reshape(dims)


def write_raw(raw: Raw2D, base) -> None:
    """``<base>.bin`` (interleaved re/im) and ``<base>.hdr``."""
    axes = {"t1_s": raw.t1, "t2_s": raw.t2}
    meta = {**raw.meta, "t1_mode": raw.t1_mode}
    _write_grid(Path(base), "raw2d", raw.data, axes, meta, complex_data=True)


def read_raw(base) -> Raw2D:
    hdr = _read_header(base)
    data = _read_values(base, hdr)
    t1, t2 = hdr["axes"]["t1_s"], hdr["axes"]["t2_s"]
    meta = dict(hdr["meta"])
    mode = meta.pop("t1_mode", "cosine")
    d1 = t1[1] - t1[0] if len(t1) > 1 else 0.0
    d2 = t2[1] - t2[0] if len(t2) > 1 else 0.0
    return Raw2D(data, d1, d2, mode, meta)


def write_spectrum(spec: Spectrum2D, base, tsv: bool = True) -> None:
    """``<base>.bin``, ``<base>.hdr`` and, optionally, a matrix ``<base>.tsv``."""
    base = Path(base)
    _write_grid(base, "spectrum2d", spec.magnitude, {"f1_hz": spec.f1, "f2_hz": spec.f2}, spec.meta, False)
    if tsv:
        with open(base.with_suffix(".tsv"), "w", encoding="utf-8") as fh:
            fh.write("f1_hz\\f2_hz\t" + "\t".join(f"{x:.6f}" for x in spec.f2) + "\n")
            for f, row in zip(spec.f1, spec.magnitude):
                fh.write(f"{f:.6f}\t" + "\t".join(f"{x:.6e}" for x in row) + "\n")


def read_spectrum(base) -> Spectrum2D:
    hdr = _read_header(base)
    return Spectrum2D(_read_values(base, hdr), hdr["axes"]["f1_hz"], hdr["axes"]["f2_hz"], dict(hdr["meta"]))


def projection_tsv(spec: Spectrum2D) -> str:
    lines = ["f1_hz\tmagnitude"] + [f"{f:.6f}\t{v:.6e}" for f, v in zip(spec.f1, spec.f1_projection())]
    return "\n".join(lines) + "\n"


def bin_width(axis: np.ndarray) -> float:
    return float(abs(axis[1] - axis[0])) if len(axis) > 1 else math.inf
