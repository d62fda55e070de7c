"""Exact algebra over n-spin Pauli strings.

Letters are ``E`` (identity), ``X``, ``Y``, ``Z``.  Spin 0 is the leftmost
letter and the most significant factor of the Kronecker product, and the
computational state ``|0>`` is spin-up (``I_z = +1/2``).

Product operators map onto Pauli strings via ``I_a = sigma_a / 2``, so a
product of ``k`` Cartesian operators on distinct spins is ``2**-k`` times a
Pauli string.  :func:`product_operator` builds them from a compact spec.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

LETTERS = "EXYZ"
COEFF_EPS = 1e-14
MAX_DENSE_SPINS = 12

# single-spin products: (a, b) -> (phase, letter) with a.b = phase * letter
_PRODUCT = {}
for _a in LETTERS:
    _PRODUCT[("E", _a)] = (1, _a)
    _PRODUCT[(_a, "E")] = (1, _a)
    _PRODUCT[(_a, _a)] = (1, "E")
for _a, _b, _c in (("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")):
    _PRODUCT[(_a, _b)] = (1j, _c)
    _PRODUCT[(_b, _a)] = (-1j, _c)

PAULI_MATRICES = {
    "E": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# (4, 2, 2) stack in LETTERS order, used by the tensor transforms below
_BASIS = np.stack([PAULI_MATRICES[a] for a in LETTERS])


class DimensionError(ValueError):
    """Operands act on different numbers of spins."""


class ResourceError(RuntimeError):
    """A dense realization would exceed :data:`MAX_DENSE_SPINS`."""


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of single-spin Pauli letters, e.g. ``PauliString("XYEZ")``."""

    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls("E" * n)

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "E")

    def commutes_with(self, other: PauliString) -> bool:
        _check_n(self.n, other.n)
        anti = sum(
            1 for a, b in zip(self.letters, other.letters) if a != "E" and b != "E" and a != b
        )
        return anti % 2 == 0

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return self.letters


def _check_n(a: int, b: int):
    if a != b:
        raise DimensionError(f"length mismatch: {a} vs {b} spins")


def _as_string(p: Union[PauliString, str]) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString(p)


def pauli_product(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Multiply two Pauli strings.

    Returns ``(phase, string)`` with ``a @ b == phase * string`` and phase in
    ``{1, -1, 1j, -1j}``.
    """
    a, b = _as_string(a), _as_string(b)
    _check_n(a.n, b.n)
    phase = 1 + 0j
    out = []
    for x, y in zip(a.letters, b.letters):
        ph, c = _PRODUCT[(x, y)]
        phase *= ph
        out.append(c)
    return phase, PauliString("".join(out))


class OperatorSum:
    """Linear combination of Pauli strings with complex coefficients.

    Instances are treated as immutable.  Coefficients with magnitude below
    :data:`COEFF_EPS` are dropped on construction, and iteration is in
    lexicographic order of the letters.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Union[str, PauliString], complex] | None = None):
        if n < 1:
            raise ValueError("an operator needs at least one spin")
        self.n = n
        clean: dict[str, complex] = {}
        for key, c in (terms or {}).items():
            letters = key.letters if isinstance(key, PauliString) else key
            if len(letters) != n:
                raise DimensionError(f"term {letters!r} does not act on {n} spins")
            if any(ch not in LETTERS for ch in letters):
                raise ValueError(f"invalid Pauli letters {letters!r}")
            c = complex(c)
            if abs(c) >= COEFF_EPS:
                clean[letters] = c
        self._terms = dict(sorted(clean.items()))

    # construction helpers
    @classmethod
    def zero(cls, n: int) -> OperatorSum:
        return cls(n)

    @classmethod
    def identity(cls, n: int, coeff: complex = 1.0) -> OperatorSum:
        return cls(n, {"E" * n: coeff})

    @classmethod
    def from_string(cls, p: Union[PauliString, str], coeff: complex = 1.0) -> OperatorSum:
        p = _as_string(p)
        return cls(p.n, {p.letters: coeff})

    # mapping-like access
    @property
    def terms(self) -> dict[str, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, p: Union[PauliString, str]) -> complex:
        return self._terms.get(_as_string(p).letters, 0j)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __bool__(self):
        return bool(self._terms)

    # linear algebra
    def __add__(self, other: OperatorSum) -> OperatorSum:
        if not isinstance(other, OperatorSum):
            return NotImplemented
        _check_n(self.n, other.n)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0) + c
        return OperatorSum(self.n, out)

    def __neg__(self) -> OperatorSum:
        return OperatorSum(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: OperatorSum) -> OperatorSum:
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar) -> OperatorSum:
        if isinstance(scalar, OperatorSum):
            return NotImplemented
        return OperatorSum(self.n, {k: c * scalar for k, c in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> OperatorSum:
        return self * (1 / scalar)

    def __matmul__(self, other: OperatorSum) -> OperatorSum:
        _check_n(self.n, other.n)
        out: dict[str, complex] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                ph, s = pauli_product(PauliString(ka), PauliString(kb))
                out[s.letters] = out.get(s.letters, 0) + ph * ca * cb
        return OperatorSum(self.n, out)

    def __eq__(self, other):
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    def allclose(self, other: OperatorSum, atol: float = 1e-12) -> bool:
        _check_n(self.n, other.n)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= atol for k in keys)

    def dagger(self) -> OperatorSum:
        return OperatorSum(self.n, {k: c.conjugate() for k, c in self._terms.items()})

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return all(abs(c.imag) <= atol for c in self._terms.values())

    def trace(self) -> complex:
        """Normalized trace ``Tr(A) / 2**n`` (the identity coefficient)."""
        return self._terms.get("E" * self.n, 0j)

    def norm(self) -> float:
        """Hilbert-Schmidt norm under the ``Tr(A^dag B) / 2**n`` convention."""
        return float(np.sqrt(sum(abs(c) ** 2 for c in self._terms.values())))

    def map_strings(self, fn) -> OperatorSum:
        """Apply ``fn(letters) -> letters`` to every term (coefficients kept)."""
        out: dict[str, complex] = {}
        for k, c in self._terms.items():
            k2 = fn(k)
            out[k2] = out.get(k2, 0) + c
        return OperatorSum(self.n, out)

    def __repr__(self):
        if not self._terms:
            return f"OperatorSum({self.n}, 0)"
        body = " + ".join(f"({c:.6g})*{k}" for k, c in self._terms.items())
        return f"OperatorSum({self.n}, {body})"

    def dumps(self) -> str:
        """Line-per-term text form ``<re> <im> <letters>``."""
        return "".join(
            f"{_fmt(c.real)} {_fmt(c.imag)} {k}\n" for k, c in self._terms.items()
        )


def _fmt(x: float) -> str:
    x = float(x) + 0.0  # folds -0.0
    return format(x, ".17g")


def loads(text: str, n: int | None = None) -> OperatorSum:
    """Parse the text form written by :meth:`OperatorSum.dumps`.

    Blank lines and ``#`` comments are skipped.  ``n`` is inferred from the
    first term when omitted; an empty file with no ``n`` is an error.
    """
    terms: dict[str, complex] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected '<re> <im> <letters>', got {raw!r}")
        try:
            c = complex(float(parts[0]), float(parts[1]))
        except ValueError:
            raise ValueError(f"line {lineno}: bad coefficient in {raw!r}") from None
        letters = parts[2]
        if any(ch not in LETTERS for ch in letters):
            raise ValueError(f"line {lineno}: invalid Pauli letters {letters!r}")
        if n is None:
            n = len(letters)
        elif len(letters) != n:
            raise ValueError(f"line {lineno}: {letters!r} does not act on {n} spins")
        terms[letters] = terms.get(letters, 0) + c
    if n is None:
        raise ValueError("empty operator file; number of spins unknown")
    return OperatorSum(n, terms)


# product-operator construction -------------------------------------------------

_CARTESIAN = {"x": "X", "y": "Y", "z": "Z", "e": "E"}


def product_operator(n: int, factors: Mapping[int, str], coeff: complex = 1.0) -> OperatorSum:
    """Product of Cartesian spin operators, ``{0: "x", 3: "y"}`` -> ``I_x^0 I_y^3``.

    Each Cartesian factor contributes ``1/2`` (``I_a = sigma_a / 2``).
    """
    letters = ["E"] * n
    k = 0
    for spin, axis in factors.items():
        if not 0 <= spin < n:
            raise IndexError(f"spin {spin} outside 0..{n - 1}")
        a = _CARTESIAN[axis.lower()]
        letters[spin] = a
        if a != "E":
            k += 1
    return OperatorSum(n, {"".join(letters): coeff * 0.5**k})


def cartesian(spec: str, coeff: complex = 1.0) -> OperatorSum:
    """``cartesian("xyyy")`` is ``I_x I_y I_y I_y`` on four spins (``e`` = identity)."""
    return product_operator(len(spec), dict(enumerate(spec)), coeff)


def embed(op: OperatorSum, positions: Sequence[int], n: int) -> OperatorSum:
    """Place ``op`` on spins ``positions`` of an ``n``-spin system (identity elsewhere)."""
    if len(positions) != op.n:
        raise DimensionError(f"{len(positions)} positions for a {op.n}-spin operator")
    if len(set(positions)) != len(positions):
        raise ValueError("positions must be distinct")
    out = {}
    for k, c in op.items():
        letters = ["E"] * n
        for pos, ch in zip(positions, k):
            letters[pos] = ch
        out["".join(letters)] = c
    return OperatorSum(n, out)


# core operations ----------------------------------------------------------------


def conjugate_by_pauli(rho: OperatorSum, p: Union[PauliString, str]) -> OperatorSum:
    """Return ``p rho p``: each term keeps its string and picks up a sign."""
    p = _as_string(p)
    _check_n(rho.n, p.n)
    return OperatorSum(
        rho.n,
        {k: (c if p.commutes_with(PauliString(k)) else -c) for k, c in rho.items()},
    )


def hs_inner(a: OperatorSum, b: OperatorSum) -> complex:
    """``Tr(a^dag b) / 2**n``, computed coefficient-wise."""
    _check_n(a.n, b.n)
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for k in small:
        total += a.coefficient(k).conjugate() * b.coefficient(k)
    return total


def _dense_cap(n: int):
    if n > MAX_DENSE_SPINS:
        raise ResourceError(f"{n} spins exceeds the dense cap of {MAX_DENSE_SPINS}")


def to_matrix(a: OperatorSum) -> np.ndarray:
    """Dense ``2**n x 2**n`` realization via the Pauli tensor basis."""
    _dense_cap(a.n)
    n = a.n
    coeffs = np.zeros((4,) * n, dtype=complex)
    for k, c in a.items():
        coeffs[tuple(LETTERS.index(ch) for ch in k)] = c
    # contract each Pauli index with the basis: (..., a_k, ...) -> (..., r_k, c_k, ...)
    t = coeffs
    for _ in range(n):
        t = np.tensordot(t, _BASIS, axes=([0], [0]))  # appends (r, c) at the end
    # t now has axes r0, c0, r1, c1, ...
    order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return t.transpose(order).reshape(2**n, 2**n)


def from_matrix(m: np.ndarray, atol: float = COEFF_EPS) -> OperatorSum:
    """Project a dense matrix onto the Pauli basis: ``c_P = Tr(P m) / 2**n``."""
    m = np.asarray(m, dtype=complex)
    dim = m.shape[0]
    n = int(round(np.log2(dim)))
    if m.shape != (dim, dim) or 2**n != dim:
        raise ValueError(f"expected a square 2**n matrix, got shape {m.shape}")
    _dense_cap(n)
    t = m.reshape((2,) * (2 * n))
    # interleave to r0, c0, r1, c1, ...
    order = list(itertools.chain.from_iterable((i, n + i) for i in range(n)))
    t = t.transpose(order)
    # Tr(P m) = sum_{r,c} P[c, r] m[r, c]
    basis_t = _BASIS.transpose(0, 2, 1)
    for _ in range(n):
        t = np.tensordot(t, basis_t, axes=([0, 1], [1, 2]))  # appends Pauli index
    coeffs = t / dim
    out = {}
    for idx in zip(*np.nonzero(np.abs(coeffs) >= atol)):
        out["".join(LETTERS[i] for i in idx)] = coeffs[idx]
    return OperatorSum(n, out)


# coherence orders ----------------------------------------------------------------

# ladder expansion of a single letter: X = s+ + s-, Y = -i s+ + i s-,
# with s+ = |0><1| = (X + iY)/2 and s- = (X - iY)/2
_LADDER = {"X": {1: 1.0, -1: 1.0}, "Y": {1: -1j, -1: 1j}}
_LADDER_PAULI = {1: (("X", 0.5), ("Y", 0.5j)), -1: (("X", 0.5), ("Y", -0.5j))}


def ladder_patterns(rho: OperatorSum) -> dict[tuple[int, ...], OperatorSum]:
    """Split ``rho`` into ladder patterns.

    Each Pauli string is expanded spin-wise into ``{E, Z, s+, s-}`` and the
    pieces are grouped by the per-spin order vector ``(p_0, ..., p_{n-1})``
    with ``p_k`` in ``{+1, 0, -1}``.  Every group is returned in the Pauli
    basis again, so the groups sum back to ``rho`` exactly.
    """
    acc: dict[tuple[int, ...], dict[str, complex]] = {}
    for k, c in rho.items():
        transverse = [i for i, ch in enumerate(k) if ch in "XY"]
        for signs in itertools.product((1, -1), repeat=len(transverse)):
            amp = c
            for i, s in zip(transverse, signs):
                amp *= _LADDER[k[i]][s]
            pattern = [0] * rho.n
            for i, s in zip(transverse, signs):
                pattern[i] = s
            bucket = acc.setdefault(tuple(pattern), {})
            # s+/s- back to Pauli letters
            for choice in itertools.product(*(_LADDER_PAULI[s] for s in signs)):
                letters = list(k)
                a = amp
                for i, (ch, w) in zip(transverse, choice):
                    letters[i] = ch
                    a *= w
                key = "".join(letters)
                bucket[key] = bucket.get(key, 0) + a
    out = {}
    for pattern, terms in acc.items():
        op = OperatorSum(rho.n, terms)
        if op:
            out[pattern] = op
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class CoherenceDecomposition:
    """Components of an operator keyed by (possibly weighted) coherence order."""

    components: dict[int, OperatorSum]
    weights: tuple[int, ...]

    def orders(self) -> list[int]:
        return sorted(self.components)

    def total(self) -> OperatorSum:
        it = iter(self.components.values())
        first = next(it)
        for comp in it:
            first = first + comp
        return first

    def __getitem__(self, order: int) -> OperatorSum:
        return self.components[order]

    def get(self, order: int, default=None):
        return self.components.get(order, default)


def _weights(n: int, weights: Iterable[int] | None) -> tuple[int, ...]:
    w = tuple(int(x) for x in weights) if weights is not None else (1,) * n
    if len(w) != n:
        raise DimensionError(f"{len(w)} weights for {n} spins")
    if any(x <= 0 for x in w):
        raise ValueError("coherence weights must be positive")
    return w


def weighted_order(pattern: Sequence[int], weights: Sequence[int]) -> int:
    return int(sum(w * p for w, p in zip(weights, pattern)))


def coherence_decompose(
    rho: OperatorSum, weights: Iterable[int] | None = None
) -> CoherenceDecomposition:
    """Group ``rho`` by coherence order ``sum_k w_k p_k``.

    ``weights=None`` gives the plain order; integer gyromagnetic weights give
    the order that a field gradient actually sees.
    """
    w = _weights(rho.n, weights)
    groups: dict[int, OperatorSum] = {}
    for pattern, op in ladder_patterns(rho).items():
        q = weighted_order(pattern, w)
        groups[q] = groups[q] + op if q in groups else op
    if not groups:
        groups = {0: OperatorSum.zero(rho.n)}
    return CoherenceDecomposition({q: g for q, g in sorted(groups.items())}, w)


def basis_orders(n: int, weights: Iterable[int] | None = None) -> np.ndarray:
    """Weighted coherence order of every dense matrix element ``|i><j|``.

    Spin ``k`` of basis state ``i`` has ``m = +1/2`` when its bit is 0, so the
    element's order is ``sum_k w_k (m_k(i) - m_k(j))``.
    """
    w = np.array(_weights(n, weights))
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    m = (0.5 - bits) @ w  # weighted magnetic quantum number per state
    return np.rint(m[:, None] - m[None, :]).astype(int)


def basis_patterns(n: int) -> np.ndarray:
    """Per-spin order pattern of each element ``|i><j|``, shape ``(2**n, 2**n, n)``."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    m = 0.5 - bits
    return np.rint(m[:, None, :] - m[None, :, :]).astype(int)
