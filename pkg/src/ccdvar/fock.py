"""Exterior-algebra combinatorics over the determinant basis of wedge^d C^n.

Basis vectors e_I of wedge^d C^n are indexed by strictly increasing d-subsets
I of [n] = {1, ..., n}, ordered lexicographically.  The first subset [d] is
the reference state.  The level of I is |I \\ [d]|, the number of indices
excited out of the reference.  Everything downstream (amplitude vectors,
Hamiltonian files, polynomial variable orderings) uses this one ordering.

Indices are 1-based in subsets, 0-based in ranks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb


class BasisError(ValueError):
    """Invalid subset, rank, or excitation specification."""


@dataclass(frozen=True)
class SpaceConfig:
    """d electrons in n >= 2d spin-orbitals.

    Carries the derived sizes used throughout:

    * ``basis_size``  N = C(n, d), the determinant-basis dimension,
    * ``num_level2``  m = C(d,2) * C(n-d,2), the doubles-amplitude count
      (equals 6 * C(n-4, 2) for d = 4),
    * ``num_level4``  s = C(d,4) * C(n-d,4) (equals C(n-4, 4) for d = 4).
    """

    d: int
    n: int

    def __post_init__(self):
        if self.d < 1:
            raise BasisError(f"electron count must be positive, got d={self.d}")
        if self.n < 2 * self.d:
            raise BasisError(f"need n >= 2d, got n={self.n} with d={self.d}")

    @property
    def basis_size(self) -> int:
        return comb(self.n, self.d)

    @property
    def num_level2(self) -> int:
        return comb(self.d, 2) * comb(self.n - self.d, 2)

    @property
    def num_level4(self) -> int:
        return comb(self.d, 4) * comb(self.n - self.d, 4)

    def level_count(self, level: int) -> int:
        return comb(self.d, level) * comb(self.n - self.d, level)


@dataclass(frozen=True)
class OrbitalSubset:
    """A sorted d-subset of [n] with its excitation level."""

    indices: tuple
    level: int


def level_of(indices, config: SpaceConfig) -> int:
    """Excitation level |I \\ [d]| of a subset."""
    return sum(1 for i in indices if i > config.d)


def _validate_subset(indices, config: SpaceConfig) -> tuple:
    I = tuple(indices)
    if len(I) != config.d:
        raise BasisError(f"expected {config.d} indices, got {len(I)}: {I}")
    if any(not (1 <= i <= config.n) for i in I):
        raise BasisError(f"indices out of range [1, {config.n}]: {I}")
    if any(I[k] >= I[k + 1] for k in range(len(I) - 1)):
        raise BasisError(f"indices must be strictly increasing: {I}")
    return I


def rank_subset(indices, config: SpaceConfig) -> tuple[int, int]:
    """Lexicographic rank of a sorted d-subset, plus its level.

    Rank 0 is the reference state [d]; rank C(n,d)-1 is {n-d+1, ..., n}.
    """
    I = _validate_subset(indices, config)
    n, d = config.n, config.d
    rank = 0
    prev = 0
    for t, i in enumerate(I):
        for v in range(prev + 1, i):
            rank += comb(n - v, d - t - 1)
        prev = i
    return rank, level_of(I, config)


def unrank_subset(rank: int, config: SpaceConfig) -> OrbitalSubset:
    """Inverse of :func:`rank_subset`."""
    n, d = config.n, config.d
    if not (0 <= rank < config.basis_size):
        raise BasisError(f"rank {rank} out of range [0, {config.basis_size})")
    out = []
    r = rank
    v = 1
    for t in range(d):
        while True:
            block = comb(n - v, d - t - 1)
            if r < block:
                break
            r -= block
            v += 1
        out.append(v)
        v += 1
    I = tuple(out)
    return OrbitalSubset(I, level_of(I, config))


def wedge_sign(indices) -> tuple[tuple, int]:
    """Sort a wedge index sequence, returning (sorted tuple, permutation sign).

    Sign is 0 when an index repeats (degenerate wedge).
    """
    seq = tuple(indices)
    if len(set(seq)) != len(seq):
        return tuple(sorted(set(seq))), 0
    inversions = sum(
        1
        for a in range(len(seq))
        for b in range(a + 1, len(seq))
        if seq[a] > seq[b]
    )
    return tuple(sorted(seq)), -1 if inversions % 2 else 1


def pi_sign(j_cap_4) -> int:
    """Sign of the arrangement permutation [4] -> (J cap [4], [4] \\ J) for level-2 J.

    +1 on {1,2}, {1,4}, {2,3}, {3,4}; -1 on {1,3}, {2,4}.
    """
    pair = tuple(sorted(j_cap_4))
    if len(pair) != 2 or any(i not in (1, 2, 3, 4) for i in pair):
        raise BasisError(f"expected a 2-subset of [4], got {j_cap_4}")
    return -1 if pair in ((1, 3), (2, 4)) else 1


@dataclass(frozen=True)
class SparseMatrixOverBasis:
    """Sparse integer matrix indexed by determinant-basis ranks."""

    dim: int
    entries: dict  # (row_rank, col_rank) -> nonzero int

    def matmul(self, other: "SparseMatrixOverBasis") -> "SparseMatrixOverBasis":
        if self.dim != other.dim:
            raise BasisError("dimension mismatch in sparse product")
        by_row = {}
        for (k, c), v in other.entries.items():
            by_row.setdefault(k, []).append((c, v))
        prod = {}
        for (r, k), v in self.entries.items():
            for c, w in by_row.get(k, ()):
                key = (r, c)
                acc = prod.get(key, 0) + v * w
                if acc:
                    prod[key] = acc
                elif key in prod:
                    del prod[key]
        return SparseMatrixOverBasis(self.dim, prod)

    def to_dense(self):
        import numpy as np

        out = np.zeros((self.dim, self.dim))
        for (r, c), v in self.entries.items():
            out[r, c] = v
        return out


def _single_excitation(i: int, a: int, config: SpaceConfig) -> SparseMatrixOverBasis:
    """X_{i,a} e_I = e_a wedge (e_i interior e_I), entrywise over the basis."""
    entries = {}
    for I in all_subsets(config):
        if i not in I or a in I:
            continue
        pos = I.index(i)
        rest = I[:pos] + I[pos + 1 :]
        # interior product sign (-1)^pos, then wedge-in sign for e_a
        sorted_row, s = wedge_sign((a,) + rest)
        sign = s * (-1 if pos % 2 else 1)
        r, _ = rank_subset(sorted_row, config)
        c, _ = rank_subset(I, config)
        entries[(r, c)] = sign
    return SparseMatrixOverBasis(config.basis_size, entries)


def excitation_matrix(alpha, beta, config: SpaceConfig) -> SparseMatrixOverBasis:
    """Multi-index excitation X_{alpha,beta}, the ordered product of
    singleton replacements paired componentwise (both sets ascending)."""
    al = tuple(sorted(alpha))
    be = tuple(sorted(beta))
    if len(al) != len(be):
        raise BasisError(f"|alpha| != |beta|: {alpha} vs {beta}")
    if len(set(al)) != len(al) or len(set(be)) != len(be):
        raise BasisError("repeated indices in excitation specification")
    if any(i > config.d for i in al):
        raise BasisError(f"alpha must lie in [d]=[{config.d}]: {alpha}")
    if any(a <= config.d or a > config.n for a in be):
        raise BasisError(f"beta must lie in [n] \\ [d]: {beta}")
    if not al:
        raise BasisError("empty excitation")
    mat = _single_excitation(al[0], be[0], config)
    for i, a in zip(al[1:], be[1:]):
        mat = mat.matmul(_single_excitation(i, a, config))
    return mat


@lru_cache(maxsize=None)
def all_subsets(config: SpaceConfig) -> tuple:
    """All d-subsets of [n] in lexicographic (rank) order."""
    return tuple(combinations(range(1, config.n + 1), config.d))


@lru_cache(maxsize=None)
def subsets_of_level(config: SpaceConfig, level: int) -> tuple:
    """Subsets of one excitation level, in lexicographic order."""
    return tuple(I for I in all_subsets(config) if level_of(I, config) == level)


@lru_cache(maxsize=None)
def level_ranks(config: SpaceConfig, level: int) -> tuple:
    """Global lexicographic ranks of the subsets of one level, ascending."""
    return tuple(rank_subset(I, config)[0] for I in subsets_of_level(config, level))


@lru_cache(maxsize=None)
def level2_index(config: SpaceConfig) -> dict:
    """Map level-2 subset -> position in the level-2 variable order."""
    return {I: k for k, I in enumerate(subsets_of_level(config, 2))}


@lru_cache(maxsize=None)
def level4_index(config: SpaceConfig) -> dict:
    return {J: k for k, J in enumerate(subsets_of_level(config, 4))}
