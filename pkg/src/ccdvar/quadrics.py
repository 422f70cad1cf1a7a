"""Defining equations of the doubles truncation variety and their Pfaffian form.

For each level-4 index set J the 18-term quadric

    P_J = sum_{I in C(J,2)} sign(I) (psi_{12I} psi_{34I^c}
                                     - psi_{13I} psi_{24I^c}
                                     + psi_{14I} psi_{23I^c}),

with I^c = J \\ I and sign(I) the parity of the arrangement J -> (I, I^c),
cuts out the image of the doubles exponential map at level 4.  Coefficients
are kept as exact integers (+1/-1); the identity against the tensor product
of Pfaffians, 8 Pf(e) (x) Pf([f]_J), is checked by exact expansion.

Two variable spaces appear:

* P_J lives in the m level-2 coordinates, indices 0..m-1 in the canonical
  level-2 order;
* Q_J = -psi_J psi_ref + P_J lives in the reduced ambient space of dimension
  1 + m + s: index 0 is psi_ref = psi_{[4]}, indices 1..m the level-2
  coordinates, indices m+1..m+s the level-4 coordinates (lexicographic).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .fock import (
    BasisError,
    SpaceConfig,
    level2_index,
    level4_index,
    level_ranks,
    subsets_of_level,
    wedge_sign,
)
from .numlin import svd_rank
from .polysys import PolySystem, SparsePoly

# pairings of [4] into two pairs; sign = arrangement parity of (pair1, pair2)
_REF_PAIRINGS = (((1, 2), (3, 4), 1), ((1, 3), (2, 4), -1), ((1, 4), (2, 3), 1))


def _split_sign(J, I) -> int:
    """Parity of the arrangement J -> (I, J \\ I), both halves sorted."""
    Ic = tuple(j for j in J if j not in I)
    _, s = wedge_sign(tuple(I) + Ic)
    return s


def _check_level4(J, config: SpaceConfig) -> tuple:
    J = tuple(sorted(J))
    if config.d != 4:
        raise BasisError("truncation-variety quadrics require d = 4")
    if len(J) != 4 or any(j <= 4 or j > config.n for j in J):
        raise BasisError(f"{J} is not a level-4 index set for n={config.n}")
    return J


def build_pj(J, config: SpaceConfig) -> SparsePoly:
    """The 18-term level-4 quadric P_J in the m level-2 variables."""
    J = _check_level4(J, config)
    idx = level2_index(config)
    poly = SparsePoly()
    for I in combinations(J, 2):
        Ic = tuple(j for j in J if j not in I)
        sgn = _split_sign(J, I)
        for pair_a, pair_b, ref_sign in _REF_PAIRINGS:
            va = idx[tuple(sorted(pair_a + I))]
            vb = idx[tuple(sorted(pair_b + Ic))]
            poly.add_term((va, vb), sgn * ref_sign)
    return poly


def pfaffian4(M) -> complex:
    """Pfaffian of a 4x4 skew-symmetric matrix: af - be + cd in the upper
    triangle labeling a=M01, b=M02, c=M03, d=M12, e=M13, f=M23."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (4, 4):
        raise BasisError(f"expected a 4x4 matrix, got shape {M.shape}")
    return M[0, 1] * M[2, 3] - M[0, 2] * M[1, 3] + M[0, 3] * M[1, 2]


def pfaffian_product_expand(J, config: SpaceConfig) -> SparsePoly:
    """Exact expansion of 8 Pf(e) (x) Pf([f]_J) into the level-2 variables.

    Uses the identification psi_{i1 i2 j1 j2} <-> 2 (e_{i1} ^ e_{i2}) (x)
    (f_{j1} ^ f_{j2}) under which a product of symmetrized wedge pairs
    unfolds into the two cross monomials:

        8 [(E1 . E2) (x) (F1 . F2)] = psi_{E1 F1} psi_{E2 F2}
                                      + psi_{E1 F2} psi_{E2 F1}.
    """
    J = _check_level4(J, config)
    idx = level2_index(config)
    f_pairings = (
        ((J[0], J[1]), (J[2], J[3]), 1),
        ((J[0], J[2]), (J[1], J[3]), -1),
        ((J[0], J[3]), (J[1], J[2]), 1),
    )
    poly = SparsePoly()
    for E1, E2, se in _REF_PAIRINGS:
        for F1, F2, sf in f_pairings:
            c = se * sf
            poly.add_term((idx[tuple(sorted(E1 + F1))], idx[tuple(sorted(E2 + F2))]), c)
            poly.add_term((idx[tuple(sorted(E1 + F2))], idx[tuple(sorted(E2 + F1))]), c)
    return poly


@dataclass(frozen=True)
class ReducedVars:
    """Variable bookkeeping for the reduced ambient space (dim 1 + m + s)."""

    config: SpaceConfig

    @property
    def num_vars(self) -> int:
        return 1 + self.config.num_level2 + self.config.num_level4

    def level2_var(self, subset) -> int:
        return 1 + level2_index(self.config)[tuple(sorted(subset))]

    def level4_var(self, subset) -> int:
        return 1 + self.config.num_level2 + level4_index(self.config)[tuple(sorted(subset))]


def build_qj_and_linears(config: SpaceConfig):
    """Homogenized quadrics Q_J over the reduced ambient space, plus the
    global ranks of the vanishing level-1 and level-3 coordinates.

    Restricted to the chart psi_ref = 1 with psi_J treated as graph values,
    the Q_J recover the graph equations psi_J = P_J of the affine variety.
    """
    if config.n < 8:
        raise BasisError("need n >= 8 for a nonempty level-4 stratum")
    rv = ReducedVars(config)
    m = config.num_level2
    quadrics = []
    for J in subsets_of_level(config, 4):
        q = SparsePoly()
        q.add_term((0, rv.level4_var(J)), -1)
        for mono, c in build_pj(J, config).items():
            q.add_term(tuple(1 + v for v in mono), c)
        quadrics.append(q)
    vanishing = sorted(level_ranks(config, 1) + level_ranks(config, 3))
    return quadrics, vanishing


def qj_system(config: SpaceConfig) -> PolySystem:
    quadrics, _ = build_qj_and_linears(config)
    return PolySystem(ReducedVars(config).num_vars, quadrics)


def pj_system(config: SpaceConfig) -> PolySystem:
    """All P_J as a system over the m level-2 variables."""
    polys = [build_pj(J, config) for J in subsets_of_level(config, 4)]
    return PolySystem(config.num_level2, polys)


@dataclass
class SpanCheckReport:
    rank_p: int
    rank_pf: int
    rank_union: int
    expected: int
    equal: bool
    sweep_stable: bool


def pfaffian_span_check(config: SpaceConfig) -> SpanCheckReport:
    """Compare the linear spans of {P_J} and {8 Pf(e) (x) Pf([f]_J)}.

    Both families are laid out as coefficient rows over the union of their
    degree-2 monomials; equality of the three ranks at the family size s
    certifies that the two spans coincide.
    """
    subsets4 = subsets_of_level(config, 4)
    ps = [build_pj(J, config) for J in subsets4]
    pfs = [pfaffian_product_expand(J, config) for J in subsets4]
    monomials = sorted({mono for poly in ps + pfs for mono in poly})
    col = {mono: k for k, mono in enumerate(monomials)}
    rows_p = np.zeros((len(ps), len(monomials)))
    rows_pf = np.zeros((len(pfs), len(monomials)))
    for r, poly in enumerate(ps):
        for mono, c in poly.items():
            rows_p[r, col[mono]] = c
    for r, poly in enumerate(pfs):
        for mono, c in poly.items():
            rows_pf[r, col[mono]] = c
    rep_p = svd_rank(rows_p)
    rep_pf = svd_rank(rows_pf)
    rep_u = svd_rank(np.vstack([rows_p, rows_pf]))
    s = config.num_level4
    equal = rep_p.rank == rep_pf.rank == rep_u.rank == s
    stable = all(
        len(set(rep.sweep_ranks())) == 1 for rep in (rep_p, rep_pf, rep_u)
    )
    return SpanCheckReport(rep_p.rank, rep_pf.rank, rep_u.rank, s, equal, stable)


class QuadricBatch:
    """Vectorized evaluation of all s quadrics P_J and their gradients.

    Every level-2 variable with non-reference part inside J appears in
    exactly one monomial of P_J, so the gradient scatter is a plain fancy
    assignment with no accumulation.
    """

    def __init__(self, config: SpaceConfig):
        self.config = config
        s = config.num_level4
        i1 = np.zeros((s, 18), dtype=np.intp)
        i2 = np.zeros((s, 18), dtype=np.intp)
        cf = np.zeros((s, 18))
        for r, J in enumerate(subsets_of_level(config, 4)):
            for t, (mono, c) in enumerate(sorted(build_pj(J, config).items())):
                i1[r, t], i2[r, t] = mono
                cf[r, t] = c
        self.i1, self.i2, self.coeff = i1, i2, cf
        rows = np.repeat(np.arange(s), 36)
        gvar = np.concatenate([i1, i2], axis=1).ravel()
        gpartner = np.concatenate([i2, i1], axis=1).ravel()
        gcoeff = np.concatenate([cf, cf], axis=1).ravel()
        self._grows, self._gvar = rows, gvar
        self._gpartner, self._gcoeff = gpartner, gcoeff

    def values(self, x: np.ndarray) -> np.ndarray:
        """P_J(x) for all J, shape (s,)."""
        return (self.coeff * x[self.i1] * x[self.i2]).sum(axis=1)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """d P_J / d x, shape (s, m)."""
        grad = np.zeros((self.config.num_level4, self.config.num_level2), dtype=complex)
        grad[self._grows, self._gvar] = self._gcoeff * x[self._gpartner]
        return grad


def apply_index_permutation(poly: SparsePoly, perm: dict, config: SpaceConfig) -> SparsePoly:
    """Relabel level-2 variables of a polynomial by an orbital permutation.

    ``perm`` maps orbital indices to orbital indices (identity where
    omitted); each coordinate psi_I picks up the wedge reordering sign of
    its relabeled index set.
    """
    subsets2 = subsets_of_level(config, 2)
    idx = level2_index(config)
    image = {}
    sign_of = {}
    for k, I in enumerate(subsets2):
        mapped = tuple(perm.get(i, i) for i in I)
        sorted_I, s = wedge_sign(mapped)
        if s == 0 or sorted_I not in idx:
            raise BasisError(f"permutation does not preserve the level-2 stratum at {I}")
        image[k] = idx[sorted_I]
        sign_of[k] = s
    out = SparsePoly()
    for mono, c in poly.items():
        sgn = 1
        for v in mono:
            sgn *= sign_of[v]
        out.add_term(tuple(image[v] for v in mono), sgn * c)
    return out


def quadric_gen_document(config: SpaceConfig) -> dict:
    """JSON-ready document with all P_J, Q_J, and vanishing linear forms."""
    rv = ReducedVars(config)
    quadrics, vanishing = build_qj_and_linears(config)
    subsets2 = subsets_of_level(config, 2)
    subsets4 = subsets_of_level(config, 4)
    variables = [{"var": 0, "subset": list(range(1, 5)), "level": 0}]
    variables += [
        {"var": 1 + k, "subset": list(I), "level": 2} for k, I in enumerate(subsets2)
    ]
    variables += [
        {"var": 1 + config.num_level2 + k, "subset": list(J), "level": 4}
        for k, J in enumerate(subsets4)
    ]
    def poly_doc(p):
        return [{"vars": list(mono), "coeff": int(c)} for mono, c in sorted(p.items())]

    return {
        "n": config.n,
        "d": config.d,
        "num_level2": config.num_level2,
        "num_level4": config.num_level4,
        "variables": variables,
        "quadrics_p": [
            {"J": list(J), "monomials": poly_doc(build_pj(J, config))}
            for J in subsets4
        ],
        "quadrics_q": [
            {"J": list(J), "monomials": poly_doc(q)}
            for J, q in zip(subsets4, quadrics)
        ],
        "vanishing_coordinate_ranks": list(vanishing),
    }
