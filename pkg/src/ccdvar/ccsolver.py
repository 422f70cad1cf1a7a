"""Truncated coupled-cluster equations for a Hamiltonian in determinant basis.

On the intermediate-normalization chart the state is parametrized by the m
doubles amplitudes alone:

    psi_ref = 1,  psi_I = x_I (level 2),  psi_J = P_J(x) (level 4),
    psi = 0 on levels 1 and 3,

and the eigenvalue is eliminated through the reference row, lambda(x) =
(H psi(x))_ref.  The unlinked doubles equations are then the m cubic
polynomials (H psi(x))_I - lambda(x) x_I = 0 over the level-2 rows I.

The root count of this system for a generic complex H is the CC degree of
the truncation variety; it is computed by monodromy and certified by the
trace test, since the Bezout number 3^m is astronomically loose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock import BasisError, SpaceConfig, level_ranks
from .monodromy import (
    MonodromyOptions,
    MonodromyResult,
    SeedPair,
    monodromy_solve,
    seed_pair,
    trace_test,
)
from .polysys import PolySystem, SparsePoly
from .quadrics import QuadricBatch, build_pj
from .fock import subsets_of_level
from .tracker import (
    ParameterHomotopy,
    SolutionSet,
    TrackOptions,
    refine_and_dedup,
    track_many,
)


@lru_cache(maxsize=None)
def _quadric_batch(config: SpaceConfig) -> QuadricBatch:
    return QuadricBatch(config)


class CCSystem:
    """Square cubic system of the truncated CC equations at a fixed Hamiltonian.

    Evaluation goes through the block structure of H over excitation levels
    rather than an expanded monomial list; the expanded ``PolySystem`` view
    is available for degree metadata, serialization, and cross-checks.
    """

    def __init__(self, hamiltonian, config: SpaceConfig):
        H = np.asarray(hamiltonian, dtype=complex)
        N = config.basis_size
        if H.shape != (N, N):
            raise BasisError(
                f"Hamiltonian has shape {H.shape}, expected ({N}, {N}) for n={config.n}"
            )
        self.config = config
        self.hamiltonian = H
        self.num_vars = config.num_level2
        self.max_degree = 3
        r2 = np.asarray(level_ranks(config, 2), dtype=np.intp)
        r4 = np.asarray(level_ranks(config, 4), dtype=np.intp)
        self._c0 = H[r2, 0]
        self._C2 = H[np.ix_(r2, r2)]
        self._C4 = H[np.ix_(r2, r4)]
        self._e0 = H[0, 0]
        self._e2 = H[0, r2]
        self._e4 = H[0, r4]
        self._diag = np.arange(self.num_vars)
        self._batch = _quadric_batch(config)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_batch"] = None  # rebuilt from the per-config cache on unpickle
        state["_polysystem"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._batch = _quadric_batch(self.config)

    @property
    def degrees(self) -> list:
        return [3] * self.num_vars

    def state_vector(self, x) -> np.ndarray:
        """Chart state psi(x) of length C(n,4)."""
        N = self.config.basis_size
        psi = np.zeros(N, dtype=complex)
        psi[0] = 1.0
        psi[np.asarray(level_ranks(self.config, 2), dtype=np.intp)] = x
        psi[np.asarray(level_ranks(self.config, 4), dtype=np.intp)] = self._batch.values(
            np.asarray(x, dtype=complex)
        )
        return psi

    def energy(self, x) -> complex:
        x = np.asarray(x, dtype=complex)
        p = self._batch.values(x)
        return self._e0 + self._e2 @ x + self._e4 @ p

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        p = self._batch.values(x)
        lam = self._e0 + self._e2 @ x + self._e4 @ p
        return self._c0 + self._C2 @ x + self._C4 @ p - lam * x

    def eval_and_jac(self, x):
        x = np.asarray(x, dtype=complex)
        p = self._batch.values(x)
        jp = self._batch.jacobian(x)
        lam = self._e0 + self._e2 @ x + self._e4 @ p
        res = self._c0 + self._C2 @ x + self._C4 @ p - lam * x
        dlam = self._e2 + self._e4 @ jp
        jac = self._C2 + self._C4 @ jp - np.outer(x, dlam)
        jac[self._diag, self._diag] -= lam
        return res, jac

    @property
    def polysystem(self) -> PolySystem:
        """Expanded sparse-polynomial form of the same equations."""
        if getattr(self, "_polysystem", None) is None:
            self._polysystem = _expand_cc_polysystem(self.hamiltonian, self.config)
        return self._polysystem


def _expand_cc_polysystem(H, config: SpaceConfig) -> PolySystem:
    m = config.num_level2
    r2 = level_ranks(config, 2)
    r4 = level_ranks(config, 4)
    pjs = [build_pj(J, config) for J in subsets_of_level(config, 4)]

    def row_poly(row) -> SparsePoly:
        p = SparsePoly()
        c = H[row, 0]
        if c != 0:
            p.add_term((), c)
        for k, rk in enumerate(r2):
            if H[row, rk] != 0:
                p.add_term((k,), H[row, rk])
        for j, rj in enumerate(r4):
            hj = H[row, rj]
            if hj != 0:
                for mono, cc in pjs[j].items():
                    p.add_term(mono, hj * cc)
        return p

    lam = row_poly(0)
    polys = []
    for i, ri in enumerate(r2):
        f = row_poly(ri)
        xi = SparsePoly({(i,): 1})
        polys.append(f.plus(lam.times(xi).scaled(-1)))
    return PolySystem(m, polys)


def build_cc_system(hamiltonian, config: SpaceConfig) -> CCSystem:
    return CCSystem(hamiltonian, config)


def energy(hamiltonian, x, config: SpaceConfig) -> complex:
    """(H psi(x))_ref, the eliminated eigenvalue at the amplitude vector x."""
    return CCSystem(hamiltonian, config).energy(x)


class CCFamily:
    """The CC equations as a family linear in the Hamiltonian entries."""

    def __init__(self, config: SpaceConfig):
        self.config = config

    def system_at(self, hamiltonian) -> CCSystem:
        return CCSystem(hamiltonian, self.config)


def cc_degree_formulas(config: SpaceConfig) -> dict:
    """Conjectured CC degree and the dimension-degree bound, as exact integers."""
    m, s = config.num_level2, config.num_level4
    report = {
        "n": config.n,
        "m": m,
        "s": s,
        "conjecture": (m - s + 2) * 2**s - 1,
        "bound": (m + 1) * 2**s,
    }
    if config.n == 9:
        # known tabulations print 1,925 or 1,935 here; both disagree with
        # (m+1) * 2^s = 61 * 32, so the formula value is reported instead
        report["bound_note"] = (
            "formula value (m+1)*2^s = 1952; previously printed values 1925 "
            "and 1935 are mutually inconsistent and are superseded"
        )
    return report


@dataclass
class CCDegreeReport:
    n: int
    m: int
    s: int
    conjecture: int
    bound: int
    count: int | None = None
    certified: bool = False
    solved: bool = False
    loops: int = 0
    trace_defect: float | None = None
    bound_note: str | None = None
    matches_conjecture: bool | None = None


def cc_degree(
    config: SpaceConfig,
    seed: int,
    opts: MonodromyOptions | None = None,
    topts: TrackOptions | None = None,
    workers: int = 1,
    allow_large: bool = False,
    log=None,
) -> tuple[CCDegreeReport, MonodromyResult | None]:
    """Certified root count of the CC equations for a seeded generic H.

    Full solves are refused above n=9 unless ``allow_large`` is set: the
    n=10 count is in the millions and takes cluster-scale time.  The
    conjecture and bound values are always reported.
    """
    formulas = cc_degree_formulas(config)
    report = CCDegreeReport(
        n=config.n,
        m=formulas["m"],
        s=formulas["s"],
        conjecture=formulas["conjecture"],
        bound=formulas["bound"],
        bound_note=formulas.get("bound_note"),
    )
    if config.n > 9 and not allow_large:
        return report, None
    sp = seed_pair(config, seed)
    family = CCFamily(config)
    result = monodromy_solve(
        family, sp.hamiltonian, sp.amplitudes[None, :], seed + 1,
        opts, topts, workers, log,
    )
    report.count = len(result.solutions)
    report.certified = result.certified
    report.solved = True
    report.loops = result.loops_run
    report.trace_defect = result.trace.defect if result.trace else None
    report.matches_conjecture = report.count == report.conjecture
    return report, result


@dataclass
class TargetSolveReport:
    solutions: SolutionSet
    n_generic: int
    n_finite: int
    attrition: float
    path_counts: dict = field(default_factory=dict)


def parameter_homotopy(
    generic_solutions,
    h_generic,
    h_target,
    config: SpaceConfig,
    topts: TrackOptions | None = None,
    workers: int = 1,
    gamma_seed: int = 0,
) -> TargetSolveReport:
    """Deform the generic solution set to a target Hamiltonian.

    Tracks every generic solution along the parameter segment with a
    unit-circle gamma detour (structured targets often sit near the
    discriminant of the straight segment); lost paths are counted as
    attrition, matching the expectation that structured Hamiltonians carry
    fewer finite roots than generic ones.
    """
    topts = topts or TrackOptions()
    rng = np.random.default_rng(gamma_seed)
    gamma = np.exp(2j * np.pi * rng.random())
    start = CCSystem(h_generic, config)
    target = CCSystem(h_target, config)
    h = ParameterHomotopy(start, target, gamma)
    pts = np.asarray(generic_solutions, dtype=complex)
    results = track_many(h, pts, topts, workers)
    counts: dict = {}
    for r in results:
        counts[r.status] = counts.get(r.status, 0) + 1
    sols = refine_and_dedup(
        target, [r.endpoint for r in results if r.status == "success"], topts
    )
    sols.path_counts = counts
    n_gen = len(pts)
    n_fin = len(sols)
    return TargetSolveReport(sols, n_gen, n_fin, 1.0 - n_fin / n_gen if n_gen else 0.0, counts)


@dataclass
class Classification:
    n_total: int
    n_real_energy: int
    n_real_amplitudes: int
    energies: list
    real_energy_flags: list
    real_amplitude_flags: list
    residuals: list

    def to_json_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_real_energy": self.n_real_energy,
            "n_real_amplitudes": self.n_real_amplitudes,
            "roots": [
                {
                    "energy": [float(e.real), float(e.imag)],
                    "real_energy": bool(fe),
                    "real_amplitudes": bool(fa),
                    "residual": float(r),
                }
                for e, fe, fa, r in zip(
                    self.energies,
                    self.real_energy_flags,
                    self.real_amplitude_flags,
                    self.residuals,
                )
            ],
        }


def classify(
    solutions: SolutionSet,
    hamiltonian,
    config: SpaceConfig,
    tol_real: float = 1e-8,
    tol_energy: float = 1e-8,
) -> Classification:
    """Realness classification of a refined CC solution set.

    A root has real amplitudes when max |Im x_i| < tol_real * (1 + ||x||)
    and a real energy when |Im lambda| < tol_energy * (1 + |lambda|); for a
    real Hamiltonian real amplitudes force a real energy, so the counts
    chain N_real_amplitudes <= N_real_energy <= N_total.
    """
    system = CCSystem(hamiltonian, config)
    energies, fe, fa, residuals = [], [], [], []
    for x in solutions.points:
        lam = system.energy(x)
        energies.append(complex(lam))
        fa.append(
            bool(np.max(np.abs(x.imag)) < tol_real * (1.0 + np.linalg.norm(x)))
        )
        fe.append(bool(abs(lam.imag) < tol_energy * (1.0 + abs(lam))))
        residuals.append(float(np.linalg.norm(system.evaluate(x), np.inf)))
    return Classification(
        len(solutions.points),
        int(sum(fe)),
        int(sum(fa)),
        energies,
        fe,
        fa,
        residuals,
    )
