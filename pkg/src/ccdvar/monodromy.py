"""Monodromy solving over a parametrized family, with a trace-test certificate.

The truncated coupled-cluster equations have Bezout number 3^m while their
actual root count is tiny by comparison, so total-degree homotopies are
useless at scale.  Instead, a single seeded solution is carried around
random triangles in parameter space; each completed loop permutes the known
solution set and gradually fills its orbit.  Completeness is certified by
the trace test: under an affine parameter pencil p(tau) = p0 + tau * dp the
coordinate-wise sum of a complete solution set moves affine-linearly in tau,
while any proper subset bends.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .cluster import exp_apply
from .fock import SpaceConfig, level_ranks
from .tracker import (
    ParameterHomotopy,
    SolutionSet,
    TrackOptions,
    canonical_order,
    newton_refine,
    track_many,
)


@dataclass
class MonodromyOptions:
    max_loops: int = 200
    stall_loops: int = 12          # consecutive no-growth loops before certification
    trace_tol: float = 1e-6
    min_success_fraction: float = 0.5
    seed_residual_tol: float = 1e-8

    def __post_init__(self):
        if self.max_loops < 1 or self.stall_loops < 1:
            raise ValueError("loop counts must be positive")


@dataclass
class SeedPair:
    """A Hamiltonian with a planted eigenpair on the truncation variety."""

    hamiltonian: np.ndarray
    amplitudes: np.ndarray
    eigenvalue: complex
    state: np.ndarray


def seed_pair(config: SpaceConfig, seed: int) -> SeedPair:
    """Construct (H0, x0, lambda0) with H0 psi0 = lambda0 psi0 exactly.

    psi0 = exp(T(t0)) e_ref for random doubles cluster amplitudes t0 lies on
    the affine truncation variety, and H0 is a random matrix rank-one
    corrected to have psi0 as an eigenvector with a normalized eigenvalue,
    so the pair solves the truncated coupled-cluster equations at H0 by
    construction.  The returned amplitude vector holds the level-2 state
    coordinates of psi0 (the chart unknowns of the CC system); these differ
    from the cluster amplitudes t0 by the per-coordinate reference-column
    signs, under which the level-4 quadrics are invariant.
    """
    rng = np.random.default_rng(seed)
    m, N = config.num_level2, config.basis_size
    t0 = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(m)
    lam0 = complex(rng.standard_normal() + 1j * rng.standard_normal())
    psi0 = exp_apply(t0, config)
    R = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    proj = np.outer(psi0, psi0.conj()) / np.vdot(psi0, psi0)
    H0 = lam0 * proj + R @ (np.eye(N) - proj)
    x0 = psi0[np.asarray(level_ranks(config, 2), dtype=np.intp)]
    return SeedPair(H0, x0, lam0, psi0)


class _SolutionStore:
    """Growing solution collection with tolerance-aware membership tests.

    Lookup is a binary-search window on re(x_0) followed by full-vector
    comparison, keeping merges near-linear for thousands of points.
    """

    def __init__(self, num_vars: int, tol: float):
        self.tol = tol
        self.num_vars = num_vars
        self._points: list = []
        self._sorted_keys: list = []  # re(x_0), ascending
        self._sorted_idx: list = []   # aligned indices into _points

    def __len__(self) -> int:
        return len(self._points)

    @property
    def points(self) -> np.ndarray:
        if not self._points:
            return np.zeros((0, self.num_vars), dtype=complex)
        return np.asarray(self._points)

    def contains(self, x: np.ndarray) -> bool:
        key = float(x[0].real)
        span = 4.0 * self.tol * (1.0 + float(np.max(np.abs(x))))
        lo = bisect.bisect_left(self._sorted_keys, key - span)
        hi = bisect.bisect_right(self._sorted_keys, key + span)
        for k in range(lo, hi):
            other = self._points[self._sorted_idx[k]]
            if np.max(np.abs(other - x)) <= self.tol * (
                1.0 + max(np.max(np.abs(other)), np.max(np.abs(x)))
            ):
                return True
        return False

    def try_add(self, x: np.ndarray) -> bool:
        if self.contains(x):
            return False
        key = float(x[0].real)
        pos = bisect.bisect_left(self._sorted_keys, key)
        self._sorted_keys.insert(pos, key)
        self._sorted_idx.insert(pos, len(self._points))
        self._points.append(np.asarray(x, dtype=complex))
        return True


@dataclass
class TraceReport:
    defect: float
    passed: bool
    inconclusive: bool
    sums: list = field(default_factory=list)


@dataclass
class MonodromyResult:
    solutions: SolutionSet
    loops_run: int
    discarded_loops: int
    stalled: bool
    trace: TraceReport | None
    certified: bool
    history: list = field(default_factory=list)  # (loop, new, total)


def _track_segment(family, p_from, p_to, points, topts, workers, gamma=1.0):
    h = ParameterHomotopy(family.system_at(p_from), family.system_at(p_to), gamma)
    results = track_many(h, points, topts, workers)
    return [r.endpoint for r in results if r.status == "success"]


def trace_test(
    family,
    p0,
    points: np.ndarray,
    seed: int,
    trace_tol: float = 1e-6,
    topts: TrackOptions | None = None,
    workers: int = 1,
) -> TraceReport:
    """Affine-pencil completeness certificate for a solution set at p0.

    Tracks the set to p0 + dp and p0 + 2 dp along a random direction and
    checks collinearity of the three coordinate sums; any lost path makes
    the verdict inconclusive rather than a pass.
    """
    topts = topts or TrackOptions()
    rng = np.random.default_rng(seed)
    dp = rng.standard_normal(np.shape(p0)) + 1j * rng.standard_normal(np.shape(p0))
    p1 = p0 + dp
    p2 = p0 + 2.0 * dp
    n_start = len(points)
    if n_start == 0:
        return TraceReport(np.inf, False, True)
    e1 = _track_segment(family, p0, p1, points, topts, workers)
    if len(e1) < n_start:
        return TraceReport(np.inf, False, True)
    e2 = _track_segment(family, p1, p2, e1, topts, workers)
    if len(e2) < n_start:
        return TraceReport(np.inf, False, True)
    s0 = np.sum(np.asarray(points), axis=0)
    s1 = np.sum(np.asarray(e1), axis=0)
    s2 = np.sum(np.asarray(e2), axis=0)
    scale = 1.0 + max(np.linalg.norm(s0), np.linalg.norm(s1), np.linalg.norm(s2))
    defect = float(np.linalg.norm(s0 - 2.0 * s1 + s2) / scale)
    return TraceReport(defect, defect < trace_tol, False, [s0, s1, s2])


def monodromy_solve(
    family,
    p0,
    seed_solutions,
    seed: int,
    opts: MonodromyOptions | None = None,
    topts: TrackOptions | None = None,
    workers: int = 1,
    log=None,
) -> MonodromyResult:
    """Populate the solution set of family at p0 by random parameter loops.

    Stops once the set has stalled for ``opts.stall_loops`` consecutive
    loops and the trace test passes (both are required to report the result
    as certified); a failed trace resumes looping until ``opts.max_loops``.
    """
    opts = opts or MonodromyOptions()
    topts = topts or TrackOptions()
    rng = np.random.default_rng(seed)
    base = family.system_at(p0)
    store = _SolutionStore(base.num_vars, topts.dedup_tol)
    for x in np.atleast_2d(np.asarray(seed_solutions, dtype=complex)):
        xr, hist, ok = newton_refine(base, x, topts)
        if not ok or hist[-1] > opts.seed_residual_tol * (1 + np.max(np.abs(xr))):
            raise ValueError("seed solution does not satisfy the system at p0")
        store.try_add(xr)

    history = []
    loops = 0
    discarded = 0
    stall = 0
    trace_report = None
    certified = False
    shape = np.shape(p0)
    while loops < opts.max_loops:
        loops += 1
        p1 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        p2 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        pts = store.points
        e1 = _track_segment(family, p0, p1, pts, topts, workers)
        e2 = _track_segment(family, p1, p2, e1, topts, workers)
        e3 = _track_segment(family, p2, p0, e2, topts, workers)
        if len(e3) < opts.min_success_fraction * len(pts):
            discarded += 1
            if log:
                log(f"loop {loops}: discarded ({len(e3)}/{len(pts)} paths survived)")
            continue
        new = 0
        for endpoint in e3:
            xr, hist, ok = newton_refine(base, endpoint, topts)
            if ok and hist[-1] <= 1e-10 * (1 + np.max(np.abs(xr))):
                if store.try_add(xr):
                    new += 1
        history.append((loops, new, len(store)))
        if log:
            log(f"loop {loops}: +{new} -> {len(store)} solutions")
        if new == 0:
            stall += 1
            if stall >= opts.stall_loops:
                trace_report = trace_test(
                    family, p0, store.points, seed + loops, opts.trace_tol, topts, workers
                )
                if log:
                    log(
                        f"trace test after {stall} stalls: defect "
                        f"{trace_report.defect:.3e} pass={trace_report.passed}"
                    )
                if trace_report.passed:
                    certified = True
                    break
                stall = 0
        else:
            stall = 0

    pts = store.points
    order = canonical_order(pts)
    pts = pts[order]
    residuals = []
    conditions = []
    for x in pts:
        fv, jac = base.eval_and_jac(x)
        residuals.append(float(np.linalg.norm(fv, np.inf)))
        conditions.append(float(np.linalg.cond(jac)))
    sols = SolutionSet(pts, np.asarray(residuals), np.asarray(conditions))
    return MonodromyResult(
        sols, loops, discarded, stall >= opts.stall_loops or certified,
        trace_report, certified, history
    )
