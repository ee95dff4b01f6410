"""Exact decision procedures for circle bundles and Seifert spaces.

Integer linear algebra uses Python ints throughout, so Smith normal form
pivots never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import InvalidParameter, NotAdmissible, NotOrientableBase

Matrix = list[list[int]]


# Smith normal form ---------------------------------------------------------------------
def _identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _swap_rows(A: Matrix, i: int, j: int) -> None:
    A[i], A[j] = A[j], A[i]


def _swap_cols(A: Matrix, i: int, j: int) -> None:
    for row in A:
        row[i], row[j] = row[j], row[i]


def _add_row(A: Matrix, dst: int, src: int, k: int) -> None:
    """row[dst] += k * row[src]"""
    A[dst] = [a + k * b for a, b in zip(A[dst], A[src])]


def _add_col(A: Matrix, dst: int, src: int, k: int) -> None:
    for row in A:
        row[dst] += k * row[src]


def smith_normal_form(M: Sequence[Sequence[int]]) -> tuple[Matrix, Matrix, Matrix]:
    """Return (U, D, V) with D = U M V diagonal, d_1 | d_2 | ..., d_i >= 0,
    and U, V unimodular."""
    A = [[int(v) for v in row] for row in M]
    m = len(A)
    n = len(A[0]) if m else 0
    if any(len(row) != n for row in A):
        raise InvalidParameter("ragged matrix")
    U, V = _identity(m), _identity(n)
    for t in range(min(m, n)):
        nonzero = [(abs(A[i][j]), i, j) for i in range(t, m) for j in range(t, n) if A[i][j]]
        if not nonzero:
            break
        _, i, j = min(nonzero)
        _swap_rows(A, t, i), _swap_rows(U, t, i)
        _swap_cols(A, t, j), _swap_cols(V, t, j)
        while True:
            p = A[t][t]
            clean = True
            for i in range(t + 1, m):
                q = A[i][t] // p
                if q:
                    _add_row(A, i, t, -q), _add_row(U, i, t, -q)
                clean &= A[i][t] == 0
            for j in range(t + 1, n):
                q = A[t][j] // p
                if q:
                    _add_col(A, j, t, -q), _add_col(V, j, t, -q)
                clean &= A[t][j] == 0
            if not clean:
                # a remainder smaller than the pivot is left: move it to the pivot
                cand = [(abs(A[i][t]), i, t) for i in range(t + 1, m) if A[i][t]]
                cand += [(abs(A[t][j]), t, j) for j in range(t + 1, n) if A[t][j]]
                _, i, j = min(cand)
                if i != t:
                    _swap_rows(A, t, i), _swap_rows(U, t, i)
                else:
                    _swap_cols(A, t, j), _swap_cols(V, t, j)
                continue
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n) if A[i][j] % p), None)
            if bad is None:
                break
            _add_row(A, t, bad[0], 1), _add_row(U, t, bad[0], 1)
        if A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            U[t] = [-a for a in U[t]]
    return U, A, V


def matmul(A: Matrix, B: Matrix) -> Matrix:
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]


def det(A: Matrix) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    n = len(A)
    if n == 0:
        return 1
    M = [list(row) for row in A]
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if M[i][k]), None)
            if sw is None:
                return 0
            M[k], M[sw] = M[sw], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def invariant_factors(D: Matrix) -> list[int]:
    return [D[i][i] for i in range(min(len(D), len(D[0]) if D else 0))]


# groups ------------------------------------------------------------------------------------
@dataclass(frozen=True)
class H1Element:
    """Coordinates in the Smith basis: free integers, then residues mod the torsion factors."""

    free: tuple[int, ...]
    torsion: tuple[int, ...]
    moduli: tuple[int, ...]

    @property
    def is_zero(self) -> bool:
        return not any(self.free) and not any(self.torsion)

    @property
    def order(self) -> int | None:
        """Order of the element, None when it has infinite order."""
        if any(self.free):
            return None
        out = 1
        for r, d in zip(self.torsion, self.moduli):
            k = d // math.gcd(r, d)
            out = out * k // math.gcd(out, k)
        return out

    def to_json(self) -> dict:
        return {"free": list(self.free), "torsion": list(self.torsion), "moduli": list(self.moduli)}


@dataclass(frozen=True)
class AbelianGroup:
    """Z^rank + Z/d_1 + ... with d_1 | d_2 | ..., presented as Z^n / (rows of relations)."""

    rank: int
    torsion: tuple[int, ...]
    relations: tuple[tuple[int, ...], ...]
    basis_change: tuple[tuple[int, ...], ...] = field(repr=False)
    diagonal: tuple[int, ...] = field(repr=False)

    @classmethod
    def presented(cls, relations: Sequence[Sequence[int]], generators: int) -> "AbelianGroup":
        rel = [list(r) for r in relations] or [[0] * generators]
        _, D, V = smith_normal_form(rel)
        diag = [D[i][i] if i < len(D) else 0 for i in range(generators)]
        torsion = tuple(d for d in diag if d >= 2)
        rank = sum(1 for d in diag if d == 0)
        return cls(rank, torsion, tuple(map(tuple, rel)), tuple(map(tuple, V)), tuple(diag))

    def element(self, x: Sequence[int]) -> H1Element:
        """Image of a vector in generator coordinates."""
        V = self.basis_change
        y = [sum(x[k] * V[k][i] for k in range(len(x))) for i in range(len(V))]
        free, tors, mods = [], [], []
        for yi, d in zip(y, self.diagonal):
            if d == 0:
                free.append(yi)
            elif d >= 2:
                tors.append(yi % d)
                mods.append(d)
        return H1Element(tuple(free), tuple(tors), tuple(mods))

    def invariant_factor_list(self) -> list[int]:
        return [0] * self.rank + list(self.torsion)

    def to_json(self) -> dict:
        return {"rank": self.rank, "torsion": list(self.torsion)}


# Seifert data --------------------------------------------------------------------------------
@dataclass(frozen=True)
class SeifertData:
    """Seifert space over an orientable genus-g base with integer Euler part ``b``
    and exceptional fibres (alpha_j, beta_j)."""

    genus: int
    b: int
    fibers: tuple[tuple[int, int], ...] = ()
    base_orientable: bool = True
    total_space_orientable: bool = True

    def __post_init__(self):
        if self.genus < 0:
            raise InvalidParameter("genus must be non-negative")
        for a, be in self.fibers:
            if a < 2 or math.gcd(a, be) != 1:
                raise InvalidParameter(f"bad exceptional fibre ({a}, {be})")

    @classmethod
    def circle_bundle(cls, genus: int, euler: int) -> "SeifertData":
        return cls(int(genus), int(euler))

    @property
    def euler_number(self) -> Fraction:
        return self.b + sum((Fraction(be, a) for a, be in self.fibers), Fraction(0))

    @property
    def euler_characteristic(self) -> int:
        return 2 - 2 * self.genus


def h1_of_seifert(s: SeifertData) -> tuple[AbelianGroup, H1Element, list[H1Element]]:
    """H_1 with the images of the regular fibre h and the exceptional classes q_j.

    Generators a_1, b_1, ..., a_g, b_g, q_1, ..., q_r, h. Surface commutators
    die in the abelianization, leaving alpha_j q_j = beta_j h and
    sum q_j + b h = 0, so that |H_1| = |e| prod alpha_j for e != 0.
    """
    if not s.base_orientable:
        raise NotOrientableBase("only orientable bases are supported")
    g2, r = 2 * s.genus, len(s.fibers)
    n = g2 + r + 1
    rows = []
    for j, (a, be) in enumerate(s.fibers):
        row = [0] * n
        row[g2 + j], row[-1] = a, -be
        rows.append(row)
    last = [0] * n
    for j in range(r):
        last[g2 + j] = 1
    last[-1] = s.b
    rows.append(last)
    G = AbelianGroup.presented(rows, n)

    def unit(k):
        v = [0] * n
        v[k] = 1
        return G.element(v)

    return G, unit(n - 1), [unit(g2 + j) for j in range(r)]


def is_admissible(s: SeifertData) -> bool:
    return s.total_space_orientable and s.base_orientable and (s.genus > 0 or len(s.fibers) >= 3)


def euler_class_dual(s: SeifertData, require_admissible: bool = True) -> tuple[H1Element, bool]:
    """Poincare dual (chi - r) gamma_0 + sum g_j of the Euler class of a
    foliation transverse to the fibres, in the Smith basis of H_1."""
    if require_admissible and not is_admissible(s):
        raise NotAdmissible("needs an orientable base other than S^2, or S^2 with >= 3 exceptional fibres",
                            genus=s.genus, fibers=len(s.fibers))
    G, gamma0, gs = h1_of_seifert(s)
    n = 2 * s.genus + len(s.fibers) + 1
    x = [0] * n
    x[-1] = s.euler_characteristic - len(s.fibers)
    for j in range(len(s.fibers)):
        x[2 * s.genus + j] = 1
    el = G.element(x)
    return el, el.is_zero


# decision procedures ---------------------------------------------------------------------------
def milnor_wood(g: int, eul: int) -> bool:
    """True iff |eul| <= max(0, 2g - 2): a circle bundle with a transverse foliation."""
    if g < 0:
        raise InvalidParameter("genus must be non-negative")
    return abs(eul) <= max(0, 2 * g - 2)


LIGHTLIKE_VERDICTS = ("impossible", "possible_g1", "necessary_holds", "excluded", "exists_affine", "unknown_sign")


def lightlike_obstruction(g: int, eul: int) -> str:
    if g < 0:
        raise InvalidParameter("genus must be non-negative")
    if g == 0:
        return "impossible"
    if g == 1:
        return "possible_g1"
    if abs(eul) != 2 * g - 2:
        return "excluded"
    return "exists_affine" if eul == 2 - 2 * g else "unknown_sign"


CAUSAL_CLASSES = ("nondegenerate", "lightlike", "mixed")


@dataclass(frozen=True)
class Verdict:
    status: str  # exists | excluded | open
    reason: str

    def to_json(self) -> dict:
        return {"status": self.status, "reason": self.reason}


_LIGHTLIKE = {
    "impossible": ("excluded", "g = 0: the universal cover is S^3 or S^2 x S^1, forcing a Reeb component"),
    "possible_g1": ("exists", "g = 1: locally free R^2 action"),
    "excluded": ("excluded", "g > 1 requires |eul| = 2g - 2"),
    "exists_affine": ("exists", "eul = chi: unit tangent bundle, locally free affine-group action"),
    "unknown_sign": ("open", "eul = -chi: necessary condition holds, no example is known"),
}


def classify_tg_foliations(g: int, eul: int) -> dict[str, Verdict]:
    """Existence of totally geodesic codimension-1 foliations transverse to the
    fibres of the circle bundle (g, eul), per causal class."""
    if milnor_wood(g, eul):
        nondeg = Verdict("exists", "Milnor-Wood holds: transverse foliation with a riemannian flow")
    else:
        nondeg = Verdict("excluded", "Milnor-Wood fails: |eul| > max(0, 2g - 2)")
    light = Verdict(*_LIGHTLIKE[lightlike_obstruction(g, eul)])
    mixed = Verdict("exists", "every orientable circle bundle carries a mixed totally geodesic foliation")
    return {"nondegenerate": nondeg, "lightlike": light, "mixed": mixed}


def classification_table(gmax: int, emax: int) -> list[dict]:
    """Rows for 0 <= g <= gmax and -emax <= eul <= emax, sorted by (g, eul)."""
    rows = []
    for g in range(gmax + 1):
        for e in range(-emax, emax + 1):
            v = classify_tg_foliations(g, e)
            rows.append({"genus": g, "euler": e, "milnor_wood": milnor_wood(g, e),
                         "lightlike_obstruction": lightlike_obstruction(g, e),
                         **{k: v[k].status for k in CAUSAL_CLASSES}})
    return rows
