"""Ordered multi-indices and permutation signs.

Indices are 0-based tuples of strictly increasing integers.  The empty tuple
plays the role of the length-0 index.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

__all__ = [
    "IndexTable",
    "index_table",
    "complement",
    "remove",
    "add",
    "perm_sign",
]


@dataclass(frozen=True)
class IndexTable:
    """All increasing P-tuples from ``range(n)`` in lexicographic order."""

    P: int
    n: int
    indices: tuple[tuple[int, ...], ...]
    _lookup: dict = field(repr=False, compare=False, hash=False)

    @property
    def N(self) -> int:
        return len(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, pos):
        return self.indices[pos]

    def position(self, index) -> int:
        """Position of ``index`` in the table (KeyError if absent)."""
        return self._lookup[tuple(index)]


@lru_cache(maxsize=None)
def index_table(P: int, n: int) -> IndexTable:
    """Enumerate the C(n, P) multi-indices of length P, lexicographically."""
    P, n = int(P), int(n)
    if not 1 <= P <= n:
        raise ValueError(f"need 1 <= P <= n, got P={P}, n={n}")
    indices = tuple(itertools.combinations(range(n), P))
    return IndexTable(P, n, indices, {I: pos for pos, I in enumerate(indices)})


def _check(I, n):
    I = tuple(int(i) for i in I)
    if any(b <= a for a, b in zip(I, I[1:])):
        raise ValueError(f"multi-index {I} is not strictly increasing")
    if I and (I[0] < 0 or I[-1] >= n):
        raise ValueError(f"multi-index {I} has entries outside range({n})")
    return I


def complement(I, n: int) -> tuple[int, ...]:
    """Increasing tuple of the entries of ``range(n)`` not in ``I``."""
    I = _check(I, n)
    taken = set(I)
    return tuple(i for i in range(n) if i not in taken)


def remove(I, i) -> tuple[int, ...]:
    if i not in I:
        raise ValueError(f"{i} is not an entry of {tuple(I)}")
    return tuple(j for j in I if j != i)


def add(I, j) -> tuple[int, ...]:
    if j in I:
        raise ValueError(f"{j} is already an entry of {tuple(I)}")
    return tuple(sorted(tuple(I) + (j,)))


def perm_sign(I, J) -> int:
    """Sign of the permutation sorting the concatenation ``(I, J)``.

    ``I`` and ``J`` may be plain integers (single entries).  Disjointness is
    required; empty arguments give +1.
    """
    I = (I,) if isinstance(I, int) else tuple(I)
    J = (J,) if isinstance(J, int) else tuple(J)
    if set(I) & set(J):
        raise ValueError(f"multi-indices {I} and {J} overlap")
    seq = I + J
    inversions = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return -1 if inversions % 2 else 1
