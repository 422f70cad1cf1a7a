"""Cluster matrix, exact exponential parametrization, and master polynomials.

The doubles cluster matrix T(x) = sum_J x_J X_{alpha_J, beta_J} runs over the
m level-2 subsets J, with alpha_J = [4] \\ J and beta_J = J \\ [4].  Applied
to the reference state through the (finite) exponential series it produces
the brute-force oracle for every closed-form level-4 quadric downstream:
the level-4 coordinates of exp(T(x)) e_ref are quadratic polynomials in x,
and every symbolic construction in this package is pinned against them.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

from .fock import (
    BasisError,
    SpaceConfig,
    excitation_matrix,
    level2_index,
    rank_subset,
    subsets_of_level,
    wedge_sign,
)
from .polysys import SparsePoly


@lru_cache(maxsize=None)
def _cluster_scatter(config: SpaceConfig):
    """Index arrays (rows, cols, signs, var) for scattering T(x) into a dense matrix.

    Entry positions are unique across amplitudes: a (row, col) pair determines
    the replacement pair (alpha, beta), so plain fancy assignment suffices.
    """
    rows, cols, signs, var = [], [], [], []
    for k, J in enumerate(subsets_of_level(config, 2)):
        alpha = tuple(i for i in range(1, config.d + 1) if i not in J)
        beta = tuple(a for a in J if a > config.d)
        mat = excitation_matrix(alpha, beta, config)
        for (r, c), s in mat.entries.items():
            rows.append(r)
            cols.append(c)
            signs.append(s)
            var.append(k)
    return (
        np.asarray(rows, dtype=np.intp),
        np.asarray(cols, dtype=np.intp),
        np.asarray(signs, dtype=float),
        np.asarray(var, dtype=np.intp),
    )


def _as_amplitudes(x, config: SpaceConfig) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (config.num_level2,):
        raise BasisError(
            f"amplitude vector has shape {x.shape}, expected ({config.num_level2},)"
        )
    return x


def amplitudes_from_dict(values: dict, config: SpaceConfig) -> np.ndarray:
    """Build an amplitude vector from {level-2 subset: coefficient}."""
    idx = level2_index(config)
    x = np.zeros(config.num_level2, dtype=complex)
    for subset, v in values.items():
        key = tuple(sorted(subset))
        if key not in idx:
            raise BasisError(f"{subset} is not a level-2 subset for n={config.n}")
        x[idx[key]] = v
    return x


def build_cluster_matrix(x, config: SpaceConfig) -> np.ndarray:
    """Dense N x N doubles cluster matrix T(x); nilpotent of order d+1."""
    x = _as_amplitudes(x, config)
    rows, cols, signs, var = _cluster_scatter(config)
    T = np.zeros((config.basis_size, config.basis_size), dtype=complex)
    T[rows, cols] = signs * x[var]
    return T


def exp_apply(x, config: SpaceConfig) -> np.ndarray:
    """State vector exp(T(x)) e_ref, summed exactly (the series terminates).

    The reference coordinate is exactly 1 and the odd-level coordinates are
    exactly 0: T raises the excitation level by 2 at each application.
    """
    x = _as_amplitudes(x, config)
    T = build_cluster_matrix(x, config)
    ref_rank, _ = rank_subset(tuple(range(1, config.d + 1)), config)
    v = np.zeros(config.basis_size, dtype=complex)
    v[ref_rank] = 1.0
    psi = v.copy()
    for k in range(1, config.d + 1):
        v = T @ v / k
        if not v.any():
            break
        psi += v
    return psi


def _inversion_parity(seq) -> int:
    inv = sum(
        1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b]
    )
    return -1 if inv % 2 else 1


def _block_pairings(avail_alpha, avail_beta, sizes):
    """Pairings of blocks over two index pools with matched block sizes.

    Yields tuples of (alpha_block, beta_block) pairs; blocks anchored at the
    smallest remaining alpha index so each uniform block permutation appears
    exactly once.
    """
    if not avail_alpha:
        yield ()
        return
    a0 = avail_alpha[0]
    rest = avail_alpha[1:]
    for size in sizes:
        if size > len(avail_alpha):
            continue
        for extra in combinations(rest, size - 1):
            alpha_block = (a0,) + extra
            alpha_left = tuple(i for i in rest if i not in extra)
            for beta_block in combinations(avail_beta, size):
                beta_left = tuple(j for j in avail_beta if j not in beta_block)
                for tail in _block_pairings(alpha_left, beta_left, sizes):
                    yield ((alpha_block, beta_block),) + tail


def master_polynomial_terms(level: int, block_sizes=None) -> dict:
    """Master polynomial of one excitation level over abstract index labels.

    Returns {tuple of amplitude subsets: +-1} where each amplitude subset is
    ([level] \\ alpha) union beta over labels {1..level} and {level+1..2*level}.
    ``block_sizes`` restricts the uniform block permutations (doubles
    truncation keeps only size-2 blocks).
    """
    labels_a = tuple(range(1, level + 1))
    labels_b = tuple(range(level + 1, 2 * level + 1))
    sizes = tuple(block_sizes) if block_sizes else tuple(range(1, level + 1))
    terms: dict = {}
    for pairing in _block_pairings(labels_a, labels_b, sizes):
        alpha_concat = [i for blk, _ in pairing for i in blk]
        beta_concat = [j for _, blk in pairing for j in blk]
        sign = _inversion_parity(alpha_concat) * _inversion_parity(beta_concat)
        mono = tuple(
            sorted(
                tuple(sorted(set(labels_a) - set(alpha) | set(beta)))
                for alpha, beta in pairing
            )
        )
        terms[mono] = terms.get(mono, 0) + sign
    return {k: v for k, v in terms.items() if v}


def master_polynomial_level4(J, config: SpaceConfig) -> SparsePoly:
    """Level-4 coordinate of the doubles exponential map as a quadric in x.

    Built from the uniform-block-permutation expansion truncated to size-2
    blocks, with the abstract labels {5..8} substituted by the four indices
    of J.  The overall replica sign is the identity sign of the reference
    column entry at level 4; the oracle equivalence against
    :func:`exp_apply` is asserted in the tests rather than assumed.
    """
    J = tuple(sorted(J))
    if len(J) != 4 or any(j <= config.d or j > config.n for j in J):
        raise BasisError(f"{J} is not a level-4 index set for n={config.n}")
    if config.d != 4:
        raise BasisError("level-4 master polynomials require d = 4")
    subst = {5 + k: J[k] for k in range(4)}
    idx = level2_index(config)
    poly = SparsePoly()
    for mono, sign in master_polynomial_terms(4, block_sizes=(2,)).items():
        key = tuple(idx[tuple(sorted(subst[j] if j in subst else j for j in sub))]
                    for sub in mono)
        poly.add_term(key, sign)
    return poly


def nilpotency_defect(x, config: SpaceConfig) -> float:
    """norm(T^(d+1)) / norm(T)^(d+1); exactly zero in exact arithmetic."""
    T = build_cluster_matrix(x, config)
    nrm = np.linalg.norm(T)
    if nrm == 0.0:
        return 0.0
    P = np.linalg.matrix_power(T, config.d + 1)
    return float(np.linalg.norm(P) / nrm ** (config.d + 1))
