"""Sparse multivariate polynomials over complex coefficients.

Monomials are tuples of variable indices with repetition (x_0^2 * x_3 is
``(0, 0, 3)``), mapped to coefficients.  Coefficients may stay integers for
exact identities; they are promoted to complex at evaluation time.

``PolySystem`` bundles polynomials over a shared variable set and compiles
them once into flat index arrays so that residual/Jacobian evaluation in the
path-tracking hot loop is a handful of vectorized numpy calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np


class PolyError(ValueError):
    """Malformed polynomial or system input."""


class SparsePoly(dict):
    """monomial tuple -> coefficient; the zero polynomial is the empty dict."""

    def __setitem__(self, key, value):
        super().__setitem__(tuple(sorted(key)), value)

    def add_term(self, key, coeff):
        key = tuple(sorted(key))
        acc = self.get(key, 0) + coeff
        if acc == 0:
            self.pop(key, None)
        else:
            super().__setitem__(key, acc)

    def degree(self) -> int:
        return max((len(k) for k in self), default=0)

    def scaled(self, c) -> "SparsePoly":
        out = SparsePoly()
        for k, v in self.items():
            out.add_term(k, c * v)
        return out

    def plus(self, other: "SparsePoly") -> "SparsePoly":
        out = SparsePoly(self)
        for k, v in other.items():
            out.add_term(k, v)
        return out

    def times(self, other: "SparsePoly") -> "SparsePoly":
        out = SparsePoly()
        for k1, v1 in self.items():
            for k2, v2 in other.items():
                out.add_term(k1 + k2, v1 * v2)
        return out

    def deriv(self, var: int) -> "SparsePoly":
        out = SparsePoly()
        for k, v in self.items():
            cnt = k.count(var)
            if cnt:
                rest = list(k)
                rest.remove(var)
                out.add_term(tuple(rest), cnt * v)
        return out

    def evaluate(self, x) -> complex:
        total = 0
        for k, v in self.items():
            term = complex(v)
            for idx in k:
                term *= x[idx]
            total += term
        return total


@dataclass
class _Compiled:
    """Flat arrays for vectorized evaluation of a whole system.

    Monomials are padded to a common width with a virtual variable whose
    value is fixed to 1, so a single gather-product covers every degree.
    """

    width: int
    vidx: np.ndarray       # (T, width) int32, padded with num_vars
    coeff: np.ndarray      # (T,) complex
    res_bounds: np.ndarray  # reduceat boundaries, one segment per polynomial
    dvidx: np.ndarray      # (TJ, width) int32 for jacobian terms
    dcoeff: np.ndarray     # (TJ,) complex
    dflat: np.ndarray      # (TJ,) int64 sorted flat positions poly*nv + var
    dbounds: np.ndarray    # reduceat boundaries for unique flats
    dpos: np.ndarray       # unique flat positions


@dataclass
class PolySystem:
    """A list of sparse polynomials in a fixed number of variables."""

    num_vars: int
    polys: list

    def __post_init__(self):
        for p in self.polys:
            for k in p:
                if any(v < 0 or v >= self.num_vars for v in k):
                    raise PolyError(
                        f"monomial {k} references variables outside [0, {self.num_vars})"
                    )
        self._compiled = None

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_compiled"] = None  # rebuilt lazily in worker processes
        return state

    @property
    def degrees(self) -> list:
        return [p.degree() for p in self.polys]

    @property
    def num_polys(self) -> int:
        return len(self.polys)

    def _compile(self) -> _Compiled:
        if self._compiled is not None:
            return self._compiled
        nv = self.num_vars
        width = max(1, max(self.degrees, default=0))
        vidx, coeff, poly_of = [], [], []
        for pi, p in enumerate(self.polys):
            terms = p.items() if p else [((), 0)]  # keep empty polys addressable
            for k, v in terms:
                vidx.append(list(k) + [nv] * (width - len(k)))
                coeff.append(complex(v))
                poly_of.append(pi)
        vidx = np.asarray(vidx, dtype=np.int32)
        coeff = np.asarray(coeff, dtype=complex)
        poly_of = np.asarray(poly_of, dtype=np.int64)
        res_bounds = np.searchsorted(poly_of, np.arange(len(self.polys)))

        dvidx, dcoeff, dflat = [], [], []
        for pi, p in enumerate(self.polys):
            for k, v in p.items():
                for var in sorted(set(k)):
                    rest = list(k)
                    rest.remove(var)
                    dvidx.append(rest + [nv] * (width - len(rest)))
                    dcoeff.append(complex(v) * k.count(var))
                    dflat.append(pi * nv + var)
        if dvidx:
            dvidx = np.asarray(dvidx, dtype=np.int32)
            dcoeff = np.asarray(dcoeff, dtype=complex)
            dflat = np.asarray(dflat, dtype=np.int64)
            order = np.argsort(dflat, kind="stable")
            dvidx, dcoeff, dflat = dvidx[order], dcoeff[order], dflat[order]
            dpos, dbounds = np.unique(dflat, return_index=True)
        else:
            dvidx = np.zeros((0, width), dtype=np.int32)
            dcoeff = np.zeros(0, dtype=complex)
            dflat = np.zeros(0, dtype=np.int64)
            dpos = np.zeros(0, dtype=np.int64)
            dbounds = np.zeros(0, dtype=np.int64)
        self._compiled = _Compiled(
            width, vidx, coeff, res_bounds, dvidx, dcoeff, dflat, dbounds, dpos
        )
        return self._compiled

    def evaluate(self, x) -> np.ndarray:
        """Residual vector at a point."""
        c = self._compile()
        xx = np.concatenate([np.asarray(x, dtype=complex), [1.0]])
        vals = c.coeff * xx[c.vidx].prod(axis=1)
        return np.add.reduceat(vals, c.res_bounds) if len(vals) else np.zeros(0, complex)

    def eval_and_jac(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Residual vector and Jacobian matrix at a point."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.num_vars,):
            raise PolyError(f"point has shape {x.shape}, expected ({self.num_vars},)")
        c = self._compile()
        xx = np.concatenate([x, [1.0]])
        res = np.add.reduceat(c.coeff * xx[c.vidx].prod(axis=1), c.res_bounds)
        jac = np.zeros(self.num_polys * self.num_vars, dtype=complex)
        if len(c.dcoeff):
            dvals = c.dcoeff * xx[c.dvidx].prod(axis=1)
            jac[c.dpos] = np.add.reduceat(dvals, c.dbounds)
        return res, jac.reshape(self.num_polys, self.num_vars)

    def to_json_dict(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "polynomials": [
                [
                    {"vars": list(k), "coeff": _coeff_json(v)}
                    for k, v in sorted(p.items())
                ]
                for p in self.polys
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PolySystem":
        polys = []
        for terms in doc["polynomials"]:
            p = SparsePoly()
            for t in terms:
                p.add_term(tuple(t["vars"]), _coeff_parse(t["coeff"]))
            polys.append(p)
        return cls(doc["num_vars"], polys)


def _coeff_json(v):
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        return v
    c = complex(v)
    return [c.real, c.imag]


def _coeff_parse(v):
    if isinstance(v, list):
        return complex(v[0], v[1])
    return v


@dataclass
class AffineSlice:
    """x = A @ y + b, a k-dimensional affine subspace of C^num_vars."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)
        nv, k = self.A.shape
        if self.b.shape != (nv,):
            raise PolyError(f"offset shape {self.b.shape} incompatible with A {self.A.shape}")
        if np.linalg.matrix_rank(self.A) < k:
            raise PolyError("slice matrix is rank deficient")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def embed(self, y) -> np.ndarray:
        return self.A @ np.asarray(y, dtype=complex) + self.b


def random_affine_slice(num_vars: int, k: int, rng) -> AffineSlice:
    """Random slice with orthonormalized directions for tracking conditioning."""
    raw = rng.standard_normal((num_vars, k)) + 1j * rng.standard_normal((num_vars, k))
    q, _ = np.linalg.qr(raw)
    b = rng.standard_normal(num_vars) + 1j * rng.standard_normal(num_vars)
    return AffineSlice(q[:, :k], b)


def restrict_affine(system: PolySystem, slc: AffineSlice) -> PolySystem:
    """Substitute x = A y + b symbolically; degrees are preserved."""
    if slc.A.shape[0] != system.num_vars:
        raise PolyError(
            f"slice over {slc.A.shape[0]} variables, system has {system.num_vars}"
        )
    k = slc.dim
    # linear forms for each original variable: b_i + sum_j A[i,j] y_j
    linear = []
    for i in range(system.num_vars):
        form = SparsePoly()
        if slc.b[i] != 0:
            form.add_term((), slc.b[i])
        for j in range(k):
            if slc.A[i, j] != 0:
                form.add_term((j,), slc.A[i, j])
        linear.append(form)
    out = []
    for p in system.polys:
        q = SparsePoly()
        for mono, coeff in p.items():
            term = SparsePoly({(): coeff})
            for var in mono:
                term = term.times(linear[var])
            q = q.plus(term)
        out.append(q)
    return PolySystem(k, out)


def random_quadratic_map(m: int, s: int, seed: int) -> PolySystem:
    """s dense homogeneous quadrics in m+1 variables, seeded complex Gaussian."""
    if m < 1 or s < 1:
        raise PolyError(f"need m, s >= 1, got m={m}, s={s}")
    rng = np.random.default_rng(seed)
    monos = list(combinations_with_replacement(range(m + 1), 2))
    polys = []
    for _ in range(s):
        coeffs = rng.standard_normal(len(monos)) + 1j * rng.standard_normal(len(monos))
        p = SparsePoly()
        for mono, c in zip(monos, coeffs):
            p.add_term(mono, c)
        polys.append(p)
    return PolySystem(m + 1, polys)
