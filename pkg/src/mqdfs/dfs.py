"""The two-logical-qubit operator DFS of a 13CH3 group.

Spin order is ``(I1, I2, I3, S)``: three methyl protons followed by the
carbon, so the error ``XXXY`` is X on every proton and Y on the carbon.

The multiple-quantum operators are written with four Cartesian products,
``IxIyIySy``, ``IxIxIySx``, ``IxIxIxSy`` and ``IyIyIySx``.  Two readings of
the proton part are supported:

``literal``
    ``IxIyIy`` is ``I1x I2y I3y``, the string exactly as printed.
``symmetrized``
    ``IxIyIy`` is the average over the distinct proton permutations,
    ``(I1x I2y I3y + I1y I2x I3y + I1y I2y I3x) / 3``.  This is the form a
    sequence of non-selective pulses can produce, and it is the only one
    in which every MQ operator has a single coherence order.

The printed DFS basis is orthonormal only under the literal reading, so
:func:`logical_basis` defaults to it, while :func:`mq_coherences` defaults
to the symmetrized reading used by the simulator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pauli import (
    OperatorSum,
    PauliString,
    cartesian,
    coherence_decompose,
    conjugate_by_pauli,
    from_matrix,
    hs_inner,
    to_matrix,
)

PROTONS = (0, 1, 2)
CARBON = 3
MQ_TERMS = ("xyyy", "xxyx", "xxxy", "yyyx")
MQ_LABELS = ("QQ", "DQ1", "DQ2", "ZQ")
MQ_COEFFS = {
    "QQ": (3, -3, -1, 1),
    "DQ1": (3, 3, -1, -1),
    "DQ2": (1, 1, 1, 1),
    "ZQ": (1, -1, 1, -1),
}
BASIS_SIGNS = ((1, -1, -1, 1), (1, 1, -1, -1), (1, 1, 1, 1), (1, -1, 1, -1))
LOGICAL_LABELS = ("|00>", "|01>", "|10>", "|11>")
CONVENTIONS = ("literal", "symmetrized")

EN_MEMBERS = ("EEEE", "EEEZ", "ZZZE", "ZZZZ", "XXXX", "XXXY", "YYYX", "YYYY")
# supports of the twelve E_m templates (each position independently X, Y or Z)
EM_SUPPORTS = (
    (0,), (1,), (2,),
    (0, 1), (0, 2), (1, 2),
    (0, 3), (2, 3), (1, 3),
    (0, 1, 3), (0, 2, 3), (1, 2, 3),
)

NOT_EIGEN = None


def mq_term(spec: str, convention: str = "symmetrized") -> OperatorSum:
    """One four-spin Cartesian product, e.g. ``mq_term("xyyy")`` for ``IxIyIySy``."""
    if convention == "literal":
        return cartesian(spec)
    if convention != "symmetrized":
        raise ValueError(f"unknown convention {convention!r}")
    perms = sorted({"".join(p) for p in itertools.permutations(spec[:3])})
    total = OperatorSum.zero(4)
    for p in perms:
        total = total + cartesian(p + spec[3])
    return total / len(perms)


def _combine(coeffs: Sequence[int], convention: str) -> OperatorSum:
    out = OperatorSum.zero(4)
    for c, spec in zip(coeffs, MQ_TERMS):
        out = out + mq_term(spec, convention) * c
    return out


def mq_coherences(convention: str = "symmetrized") -> list[OperatorSum]:
    """QQ, DQ1, DQ2 and ZQ operators with their printed integer coefficients."""
    return [_combine(MQ_COEFFS[label], convention) for label in MQ_LABELS]


def highest_state(convention: str = "symmetrized") -> OperatorSum:
    """``8 IxIyIySy``, the sum of the four MQ coherences."""
    return mq_term("xyyy", convention) * 8


@dataclass(frozen=True)
class LogicalBasis:
    rho: tuple[OperatorSum, ...]
    labels: tuple[str, ...] = LOGICAL_LABELS
    convention: str = "literal"

    def gram(self) -> np.ndarray:
        return np.array([[hs_inner(a, b) for b in self.rho] for a in self.rho])


def logical_basis(convention: str = "literal", normalize: bool = True) -> LogicalBasis:
    ops = [_combine(signs, convention) for signs in BASIS_SIGNS]
    if normalize:
        ops = [op / op.norm() for op in ops]
    return LogicalBasis(tuple(ops), LOGICAL_LABELS, convention)


@dataclass(frozen=True)
class ErrorFamily:
    members: tuple[PauliString, ...]
    family_tag: str

    def __len__(self):
        return len(self.members)

    def __contains__(self, item):
        item = item if isinstance(item, PauliString) else PauliString(item)
        return item in self.members


def error_family(tag: str) -> ErrorFamily:
    """Enumerate ``En`` (8 collective errors) or ``Em`` (144 partial ones)."""
    if tag.lower() == "en":
        return ErrorFamily(tuple(PauliString(s) for s in EN_MEMBERS), "En")
    if tag.lower() != "em":
        raise ValueError(f"unknown error family {tag!r}")
    members = []
    for support in EM_SUPPORTS:
        for letters in itertools.product("XYZ", repeat=len(support)):
            s = ["E"] * 4
            for pos, ch in zip(support, letters):
                s[pos] = ch
            members.append(PauliString("".join(s)))
    return ErrorFamily(tuple(members), "Em")


def eigenoperator_check(rho: OperatorSum, p: PauliString | str) -> int | None:
    """``+1``/``-1`` if ``p rho p = +-rho``, else :data:`NOT_EIGEN`."""
    image = conjugate_by_pauli(rho, p)
    if not rho:
        return 1
    if image == rho:
        return 1
    if image == -rho:
        return -1
    return NOT_EIGEN


def permutation_symmetry_check(p: PauliString | str, protons: Iterable[int] = PROTONS) -> str:
    """``"symmetric"`` iff every permutation of the proton positions fixes ``p``."""
    p = p if isinstance(p, PauliString) else PauliString(p)
    protons = tuple(protons)
    if any(not 0 <= k < p.n for k in protons):
        raise IndexError("proton index outside the string")
    letters = list(p.letters)
    for perm in itertools.permutations(protons):
        moved = letters.copy()
        for src, dst in zip(protons, perm):
            moved[dst] = letters[src]
        if moved != letters:
            return "asymmetric"
    return "symmetric"


def permutation_image(op: OperatorSum, perm: Sequence[int]) -> OperatorSum:
    """Relabel spins: letter at position ``i`` moves to ``perm[i]``."""

    def move(letters: str) -> str:
        out = list(letters)
        for i, j in enumerate(perm):
            out[j] = letters[i]
        return "".join(out)

    return op.map_strings(move)


# reporting ----------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"CHECK {self.name} {'PASS' if self.passed else 'FAIL'} {self.detail}".rstrip()


FLIP_FLOP_NOTE = (
    "two-qubit projector: IxIx + IyIy is a zero-quantum flip-flop term under the ladder "
    "expansion, so the whole operator is order 0; it is not a double-quantum pair"
)


def two_qubit_dfs_demo() -> dict:
    """Two-spin warm-up: Bell-type logical states, their projectors and symmetries."""
    ket01 = np.zeros(4)
    ket01[1] = 1
    ket10 = np.zeros(4)
    ket10[2] = 1
    zero_l = (ket01 + ket10) / np.sqrt(2)
    one_l = (ket01 - ket10) / np.sqrt(2)
    gram = np.array([[a @ b for b in (zero_l, one_l)] for a in (zero_l, one_l)])
    # built from unnormalized kets so every entry is an exact dyadic rational
    proj0 = from_matrix(np.outer(ket01 + ket10, ket01 + ket10) / 2)
    proj1 = from_matrix(np.outer(ket01 - ket10, ket01 - ket10) / 2)
    # 1/2 (1/2 - 2 Iz Iz + 2 Ix Ix + 2 Iy Iy)
    expansion = (
        OperatorSum.identity(2, 0.25)
        - cartesian("zz") * 1.0
        + cartesian("xx") * 1.0
        + cartesian("yy") * 1.0
    )
    checks = [
        Check("bell_orthonormal", bool(np.allclose(gram, np.eye(2), atol=1e-15)), "logical kets orthonormal"),
        Check("projector_expansion", proj0 == expansion, "projector equals 1/2(1/2 - 2IzIz + 2IxIx + 2IyIy)"),
        Check(
            "projector_matrix",
            bool(np.array_equal(to_matrix(expansion), np.outer(ket01 + ket10, ket01 + ket10) / 2)),
            "dense matrix equals |0_L><0_L|",
        ),
    ]
    for err in ("XX", "ZZ"):
        fixed = conjugate_by_pauli(proj0, err) == proj0 and conjugate_by_pauli(proj1, err) == proj1
        checks.append(Check(f"twoqubit_invariance_{err}", fixed, f"{err} conjugation fixes both projectors"))
    decomposition = coherence_decompose(proj0)
    orders = decomposition.orders()
    checks.append(Check("projector_orders", orders == [0], f"plain orders {orders}"))
    return {
        "checks": checks,
        "projectors": (proj0, proj1),
        "decomposition": decomposition,
        "notes": [FLIP_FLOP_NOTE],
    }


@dataclass
class DfsReport:
    orthogonality: np.ndarray
    eigen_signs: dict[tuple[str, str], int | None]
    permutation_results: dict[str, str]
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append("NOTES")
        lines.extend(f"NOTE {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _fmt_sign(s: int | None) -> str:
    return "not-eigen" if s is None else f"{s:+d}"


def dfs_report(
    basis: LogicalBasis | None = None,
    families: Iterable[str] = ("En", "Em"),
    include_demo: bool = True,
) -> DfsReport:
    """Run every DFS check and collect the results in a deterministic order."""
    basis = basis or logical_basis()
    families = [f.lower() for f in families]
    checks: list[Check] = []
    notes: list[str] = []

    gram = basis.gram()
    off = float(np.max(np.abs(gram - np.diag(np.diag(gram)))))
    diag = float(np.max(np.abs(np.diag(gram) - 1)))
    checks.append(Check("orthogonality", off < 1e-12 and diag < 1e-12, f"max_offdiag={off:.3g} max_diag_dev={diag:.3g}"))
    herm = all(r.is_hermitian(1e-15) for r in basis.rho)
    checks.append(Check("hermitian", herm, "all basis operators Hermitian"))
    traceless = all(abs(r.trace()) < 1e-15 for r in basis.rho)
    checks.append(Check("traceless", traceless, "all basis operators traceless"))

    for conv in CONVENTIONS:
        total = sum(mq_coherences(conv)[1:], mq_coherences(conv)[0])
        residual = total - highest_state(conv)
        checks.append(Check(f"mq_sum_{conv}", not residual, "QQ+DQ1+DQ2+ZQ - 8IxIyIySy = 0"))

    eigen: dict[tuple[str, str], int | None] = {}
    perm_results: dict[str, str] = {}
    if "en" in families:
        en = error_family("En")
        for label, rho in zip(basis.labels, basis.rho):
            for p in en.members:
                sign = eigenoperator_check(rho, p)
                eigen[(label, p.letters)] = sign
                checks.append(Check(f"eigen {label} {p.letters}", sign is not None, f"sign={_fmt_sign(sign)}"))
        for p in en.members:
            res = permutation_symmetry_check(p)
            perm_results[p.letters] = res
            checks.append(Check(f"en_symmetric {p.letters}", res == "symmetric", res))
        closed = True
        span = np.array([[hs_inner(a, b) for b in basis.rho] for a in basis.rho])
        for p in en.members:
            for rho in basis.rho:
                img = conjugate_by_pauli(rho, p)
                coords = np.array([hs_inner(b, img) for b in basis.rho])
                back = sum((b * c for b, c in zip(basis.rho, np.linalg.solve(span, coords))), OperatorSum.zero(4))
                closed &= back.allclose(img, 1e-12)
        checks.append(Check("en_closure", bool(closed), "span closed under conjugation by every En member"))

    if "em" in families:
        em = error_family("Em")
        z_only = []
        for p in em.members:
            res = permutation_symmetry_check(p)
            perm_results[p.letters] = res
            checks.append(Check(f"em_asymmetric {p.letters}", res == "asymmetric", res))
            if set(p.letters) <= {"E", "Z"} and all(eigenoperator_check(r, p) is not None for r in basis.rho):
                z_only.append(p.letters)
        if z_only:
            notes.append(
                f"{len(z_only)} Em members built only from Z act as +-1 on every basis operator "
                "(each basis term is transverse on all four spins); they are excluded by the "
                "collective-noise argument, not by the algebra"
            )

    if include_demo:
        demo = two_qubit_dfs_demo()
        checks.extend(demo["checks"])
        notes.extend(demo["notes"])

    lit = mq_coherences("literal")
    notes.append(
        "MQ operators as printed (literal strings) overlap: "
        f"<QQ,ZQ>={hs_inner(lit[0], lit[3]).real:.6g}, <DQ1,DQ2>={hs_inner(lit[1], lit[2]).real:.6g}; "
        "their proton-symmetrized forms are pure coherence orders and mutually orthogonal"
    )
    sym_basis = logical_basis("symmetrized")
    sym_off = float(np.max(np.abs(sym_basis.gram() - np.eye(4))))
    notes.append(
        f"basis is orthonormal for the literal strings; its proton-symmetrized form is not "
        f"(max Gram deviation {sym_off:.6g})"
    )
    notes.append(
        "basis operators are not proton-permutation symmetric: e.g. swapping protons 1 and 2 "
        "maps IxIyIySy to IyIxIySy"
    )
    notes.append(
        "eigen signs are tested per Pauli member: p rho p = +-rho for each member individually"
    )
    return DfsReport(gram, eigen, perm_results, checks, notes)
