"""Finite abelian groups, bicharacters and small dense-matrix checks.

Group elements are tuples of integers, one per cyclic factor. For the
elementary abelian 2-groups used throughout, an element is a fixed-length
bit word and multiplication is XOR. Elements are ordered lexicographically;
that ordering fixes every basis ordering downstream.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InconsistentDataError, StructuralError

EPS_CHECK = 1e-9
EPS_SOLVER = 1e-7

Element = tuple[int, ...]


def group_mul(g: Element, h: Element) -> Element:
    """Multiply two elements of Z2^n given as bit words (XOR)."""
    if len(g) != len(h):
        raise StructuralError(f"bit words of different length: {g} and {h}")
    return tuple(a ^ b for a, b in zip(g, h))


def standard_bicharacter(g: Element, h: Element, signs=None) -> int:
    """Return (-1)**(g.h) for bit words, or the override sign table entry.

    ``signs`` may be a symmetric, nondegenerate matrix of +-1 indexed by the
    lexicographic position of the elements; it is validated on every call
    because it is tiny.
    """
    if len(g) != len(h):
        raise StructuralError(f"bit words of different length: {g} and {h}")
    if signs is None:
        return -1 if sum(a & b for a, b in zip(g, h)) % 2 else 1
    table = np.asarray(signs)
    _validate_sign_table(table, len(g))
    return int(table[_bits_index(g), _bits_index(h)])


def _bits_index(g: Element) -> int:
    return int("".join(str(b) for b in g), 2) if g else 0


def _validate_sign_table(table: np.ndarray, n: int) -> None:
    size = 2**n
    if table.shape != (size, size):
        raise StructuralError(f"sign table must be {size}x{size}, got {table.shape}")
    if not np.all(np.isin(table, (-1, 1))):
        raise InconsistentDataError("sign table entries must be +-1")
    if not np.array_equal(table, table.T):
        raise InconsistentDataError("sign table is not symmetric")
    if abs(np.linalg.det(table.astype(float))) < 0.5:
        raise InconsistentDataError("sign table is degenerate")


def is_unitary(m, tol: float = EPS_CHECK) -> bool:
    """True iff max |m^dagger m - I| <= tol."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructuralError(f"is_unitary needs a square matrix, got shape {m.shape}")
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])), initial=0.0) <= tol)


@dataclass(frozen=True)
class FiniteAbelianGroup:
    """Product of cyclic groups Z_m1 x ... x Z_mk with lexicographic elements."""

    moduli: tuple[int, ...]

    @classmethod
    def elementary(cls, n: int) -> FiniteAbelianGroup:
        """Z2^n."""
        return cls((2,) * n)

    @classmethod
    def cyclic(cls, m: int) -> FiniteAbelianGroup:
        return cls((m,))

    @cached_property
    def elements(self) -> tuple[Element, ...]:
        return tuple(itertools.product(*(range(m) for m in self.moduli)))

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def is_elementary_two(self) -> bool:
        return all(m == 2 for m in self.moduli)

    def mul(self, g: Element, h: Element) -> Element:
        if len(g) != len(self.moduli) or len(h) != len(self.moduli):
            raise StructuralError(f"elements {g}, {h} do not belong to {self}")
        return tuple((a + b) % m for a, b, m in zip(g, h, self.moduli))

    def inverse(self, g: Element) -> Element:
        return tuple((-a) % m for a, m in zip(g, self.moduli))

    def bicharacter(self, g: Element, h: Element) -> complex:
        """exp(2 pi i sum g_k h_k / m_k); equals (-1)^(g.h) on Z2^n."""
        if self.is_elementary_two:
            return complex(standard_bicharacter(g, h))
        phase = sum(a * b / m for a, b, m in zip(g, h, self.moduli))
        return cmath.exp(2j * cmath.pi * phase)

    def name(self, g: Element) -> str:
        if self.is_elementary_two:
            return "".join(str(b) for b in g)
        return ",".join(str(b) for b in g)

    def __str__(self) -> str:
        return " x ".join(f"Z{m}" for m in self.moduli) or "trivial"
