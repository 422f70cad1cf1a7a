"""Predictor-corrector homotopy path tracking with the gamma trick.

The homotopy convention is H(x, t) = t * gamma * G(x) + (1 - t) * F(x) with
t running from 1 to 0, so start solutions satisfy G and endpoints satisfy
the target F.  Prediction is RK4 on the Davidenko system dx/dt =
-J_x^{-1} H_t, correction is Newton at the new t, and step control is
failure-driven: shrink on corrector failure, grow after a run of successes.

All randomness is drawn by the coordinator; individual paths are
deterministic functions of their inputs, so worker scheduling cannot change
results.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .numlin import SingularMatrixError, solve_linear
from .polysys import PolySystem, SparsePoly


@dataclass
class TrackOptions:
    initial_step: float = 0.05
    max_step: float = 0.2
    corrector_tol: float = 1e-11
    max_corrector_iters: int = 3
    step_shrink: float = 0.5
    step_grow: float = 2.0
    grow_after: int = 5
    min_step: float = 1e-14
    divergence_norm: float = 1e12
    endpoint_tol: float = 1e-10
    max_steps: int = 10000
    refine_tol: float = 1e-13
    refine_max_iters: int = 30
    dedup_tol: float = 1e-8

    def __post_init__(self):
        if not (0 < self.step_shrink < 1 < self.step_grow):
            raise ValueError("need step_shrink < 1 < step_grow")
        for name in ("initial_step", "corrector_tol", "min_step", "divergence_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class PathResult:
    status: str  # success | diverged | step_failure | singular_endpoint
    endpoint: np.ndarray | None
    residual: float
    steps: int
    condition: float


class ConvexHomotopy:
    """t * gamma * G(x) + (1 - t) * F(x) for two square systems."""

    def __init__(self, start, target, gamma: complex):
        if start.num_vars != target.num_vars:
            raise ValueError("start/target variable counts differ")
        self.start = start
        self.target = target
        self.gamma = complex(gamma)
        self.num_vars = target.num_vars
        self.max_degree = max(max(target.degrees, default=1), 1)

    def eval_all(self, x, t):
        gv, gj = self.start.eval_and_jac(x)
        fv, fj = self.target.eval_and_jac(x)
        tg = t * self.gamma
        h = tg * gv + (1.0 - t) * fv
        jac = tg * gj + (1.0 - t) * fj
        ht = self.gamma * gv - fv
        return h, jac, ht

    def target_residual(self, x) -> float:
        return float(np.linalg.norm(self.target.eval_and_jac(x)[0], np.inf))


class ParameterHomotopy:
    """Homotopy between two members of a family linear in its parameters.

    With p(t) = (t*gamma*p_start + (1-t)*p_target) / (t*gamma + 1 - t) and
    F(x; p) linear homogeneous in p, both H and H_t are combinations of the
    two fixed end systems; gamma != 1 detours through complex parameter
    space to dodge the discriminant on structured targets.
    """

    def __init__(self, system_start, system_target, gamma: complex = 1.0):
        if system_start.num_vars != system_target.num_vars:
            raise ValueError("start/target variable counts differ")
        self.sys_start = system_start
        self.sys_target = system_target
        self.gamma = complex(gamma)
        self.num_vars = system_target.num_vars
        self.max_degree = getattr(system_target, "max_degree", 3)

    def eval_all(self, x, t):
        sv, sj = self.sys_start.eval_and_jac(x)
        tv, tj = self.sys_target.eval_and_jac(x)
        den = t * self.gamma + (1.0 - t)
        a = t * self.gamma / den
        b = (1.0 - t) / den
        h = a * sv + b * tv
        jac = a * sj + b * tj
        ht = (self.gamma / den**2) * (sv - tv)
        return h, jac, ht

    def target_residual(self, x) -> float:
        return float(np.linalg.norm(self.sys_target.eval_and_jac(x)[0], np.inf))


def _davidenko(h, x, t):
    _, jac, ht = h.eval_all(x, t)
    return solve_linear(jac, -ht)


def track_path(h, start, opts: TrackOptions | None = None) -> PathResult:
    """Track one path of the homotopy from t=1 to t=0."""
    opts = opts or TrackOptions()
    x = np.asarray(start, dtype=complex)
    t = 1.0
    step = opts.initial_step
    steps = 0
    run = 0
    while t > 0.0:
        if steps >= opts.max_steps:
            return PathResult("step_failure", x, np.inf, steps, np.inf)
        dt = min(step, t)
        accepted, x_new = _predict_correct(h, x, t, dt, opts)
        steps += 1
        if accepted:
            x, t = x_new, t - dt
            if np.max(np.abs(x)) > opts.divergence_norm:
                return PathResult("diverged", None, np.inf, steps, np.inf)
            run += 1
            if run >= opts.grow_after:
                step = min(step * opts.step_grow, opts.max_step)
                run = 0
        else:
            run = 0
            step *= opts.step_shrink
            if step < opts.min_step:
                if np.max(np.abs(x)) > 1e8:
                    return PathResult("diverged", None, np.inf, steps, np.inf)
                return PathResult("step_failure", x, np.inf, steps, np.inf)
    return _finalize(h, x, steps, opts)


def _predict_correct(h, x, t, dt, opts: TrackOptions):
    """One RK4 prediction plus Newton correction; False on any failure."""
    hh = -dt
    try:
        k1 = _davidenko(h, x, t)
        k2 = _davidenko(h, x + 0.5 * hh * k1, t + 0.5 * hh)
        k3 = _davidenko(h, x + 0.5 * hh * k2, t + 0.5 * hh)
        k4 = _davidenko(h, x + hh * k3, t + hh)
    except SingularMatrixError:
        return False, x
    xp = x + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(xp)):
        return False, x
    t_new = t + hh
    for _ in range(opts.max_corrector_iters):
        try:
            hv, jac, _ = h.eval_all(xp, t_new)
            delta = solve_linear(jac, -hv)
        except SingularMatrixError:
            return False, x
        xp = xp + delta
        if np.max(np.abs(delta)) <= opts.corrector_tol * (1.0 + np.max(np.abs(xp))):
            return True, xp
    return False, x


def _finalize(h, x, steps, opts: TrackOptions) -> PathResult:
    """Newton polish at t=0 and endpoint classification."""
    converged = False
    for _ in range(10):
        try:
            hv, jac, _ = h.eval_all(x, 0.0)
            delta = solve_linear(jac, -hv)
        except SingularMatrixError:
            break
        x = x + delta
        if np.max(np.abs(delta)) <= opts.corrector_tol * (1.0 + np.max(np.abs(x))):
            converged = True
            break
    residual = h.target_residual(x)
    _, jac, _ = h.eval_all(x, 0.0)
    cond = float(np.linalg.cond(jac))
    scale = 1.0 + np.max(np.abs(x)) ** h.max_degree
    if residual <= opts.endpoint_tol * scale:
        return PathResult("success", x, residual, steps, cond)
    if not converged and (cond > 1e8 or not np.isfinite(cond)):
        return PathResult("singular_endpoint", x, residual, steps, cond)
    return PathResult("step_failure", x, residual, steps, cond)


# -- worker pool ---------------------------------------------------------

_POOL_PAYLOAD = None


def _pool_init(payload):
    global _POOL_PAYLOAD
    _POOL_PAYLOAD = payload


def _pool_run(start):
    h, opts = _POOL_PAYLOAD
    return track_path(h, start, opts)


def track_many(h, starts, opts: TrackOptions | None = None, workers: int = 1) -> list:
    """Track a batch of start points; results are in start-point order."""
    opts = opts or TrackOptions()
    starts = list(starts)
    if workers <= 1 or len(starts) < 4:
        return [track_path(h, s, opts) for s in starts]
    chunk = max(1, len(starts) // (workers * 8))
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_pool_init, initargs=((h, opts),)
    ) as pool:
        return list(pool.map(_pool_run, starts, chunksize=chunk))


# -- endpoint refinement and deduplication --------------------------------


def newton_refine(system, x, opts: TrackOptions | None = None):
    """Newton iteration to full precision; returns (x, residual_history, ok)."""
    opts = opts or TrackOptions()
    x = np.asarray(x, dtype=complex)
    history = []
    for _ in range(opts.refine_max_iters):
        fv, jac = system.eval_and_jac(x)
        res = float(np.linalg.norm(fv, np.inf))
        history.append(res)
        if res <= opts.refine_tol * (1.0 + float(np.max(np.abs(x)))):
            return x, history, True
        try:
            delta = solve_linear(jac, -fv)
        except SingularMatrixError:
            return x, history, False
        if not np.all(np.isfinite(delta)):
            return x, history, False
        x = x + delta
    fv, _ = system.eval_and_jac(x)
    history.append(float(np.linalg.norm(fv, np.inf)))
    return x, history, history[-1] <= 1e-9 * (1.0 + float(np.max(np.abs(x))))


@dataclass
class SolutionSet:
    """Deduplicated, refined endpoints with residuals and classification data."""

    points: np.ndarray  # (k, num_vars) complex, canonically sorted
    residuals: np.ndarray
    conditions: np.ndarray
    path_counts: dict = field(default_factory=dict)
    rejected: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def to_json_dict(self) -> dict:
        return {
            "num_solutions": len(self.points),
            "path_counts": dict(self.path_counts),
            "num_rejected": len(self.rejected),
            "solutions": [
                {
                    "point": [[float(z.real), float(z.imag)] for z in p],
                    "residual": float(r),
                    "condition": float(c) if np.isfinite(c) else None,
                }
                for p, r, c in zip(self.points, self.residuals, self.conditions)
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SolutionSet":
        pts = [
            [complex(re, im) for re, im in sol["point"]] for sol in doc["solutions"]
        ]
        res = [sol["residual"] for sol in doc["solutions"]]
        cond = [
            sol["condition"] if sol["condition"] is not None else np.inf
            for sol in doc["solutions"]
        ]
        k = len(pts)
        nv = len(pts[0]) if pts else 0
        return cls(
            np.asarray(pts, dtype=complex).reshape(k, nv),
            np.asarray(res, dtype=float),
            np.asarray(cond, dtype=float),
            dict(doc.get("path_counts", {})),
        )


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Deterministic ordering: lexicographic over interleaved (re, im) coords."""
    if len(points) == 0:
        return np.zeros(0, dtype=int)
    cols = []
    for j in range(points.shape[1]):
        cols.append(points[:, j].real)
        cols.append(points[:, j].imag)
    return np.lexsort(list(reversed(cols)))


def dedup_points(points, residuals, conditions, tol: float):
    """Merge points within tolerance, keeping the lowest-residual representative.

    Closeness is ||a - b||_inf <= tol * (1 + ||a||_inf); merging uses
    union-find over a sort-window sweep so large sets stay near-linear.
    """
    pts = np.asarray(points)
    k = len(pts)
    if k == 0:
        return pts, np.asarray(residuals), np.asarray(conditions)
    key = pts[:, 0].real
    order = np.argsort(key, kind="stable")
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_pos in range(k):
        i = order[a_pos]
        window = tol * (1.0 + float(np.max(np.abs(pts[i]))))
        for b_pos in range(a_pos + 1, k):
            j = order[b_pos]
            if key[j] - key[i] > window:
                break
            if np.max(np.abs(pts[i] - pts[j])) <= tol * (
                1.0 + max(np.max(np.abs(pts[i])), np.max(np.abs(pts[j])))
            ):
                parent[find(j)] = find(i)
    best = {}
    for i in range(k):
        r = find(i)
        if r not in best or residuals[i] < residuals[best[r]]:
            best[r] = i
    keep = sorted(best.values())
    return pts[keep], np.asarray(residuals)[keep], np.asarray(conditions)[keep]


def refine_and_dedup(system, points, opts: TrackOptions | None = None) -> SolutionSet:
    """Newton-refine endpoints, drop non-convergent ones, merge duplicates."""
    opts = opts or TrackOptions()
    refined, residuals, conditions, rejected = [], [], [], []
    for p in points:
        x, history, ok = newton_refine(system, p, opts)
        if ok:
            refined.append(x)
            residuals.append(history[-1])
            _, jac = system.eval_and_jac(x)
            conditions.append(float(np.linalg.cond(jac)))
        else:
            rejected.append((np.asarray(p, dtype=complex), history))
    if refined:
        pts, res, cond = dedup_points(
            np.asarray(refined), np.asarray(residuals), np.asarray(conditions), opts.dedup_tol
        )
        order = canonical_order(pts)
        pts, res, cond = pts[order], res[order], cond[order]
    else:
        nv = getattr(system, "num_vars", 0)
        pts = np.zeros((0, nv), dtype=complex)
        res = np.zeros(0)
        cond = np.zeros(0)
    return SolutionSet(pts, res, cond, rejected=rejected)


def total_degree_start(degrees) -> tuple[PolySystem, list]:
    """Start system x_i^{d_i} - 1 and its grid of roots-of-unity solutions."""
    nv = len(degrees)
    polys = []
    for i, d in enumerate(degrees):
        if d < 1:
            raise ValueError(f"polynomial {i} has degree {d}; need >= 1")
        p = SparsePoly()
        p.add_term((i,) * d, 1)
        p.add_term((), -1)
        polys.append(p)
    roots = [
        np.exp(2j * np.pi * np.arange(d) / d) for d in degrees
    ]
    starts = [np.array(combo, dtype=complex) for combo in itertools.product(*roots)]
    return PolySystem(nv, polys), starts


def solve_total_degree(
    target,
    opts: TrackOptions | None = None,
    seed: int = 0,
    workers: int = 1,
) -> SolutionSet:
    """Solve a square system by a total-degree homotopy over all Bezout paths."""
    opts = opts or TrackOptions()
    degrees = target.degrees
    if target.num_polys != target.num_vars:
        raise ValueError(
            f"square system required: {target.num_polys} equations, "
            f"{target.num_vars} variables"
        )
    start_sys, starts = total_degree_start(degrees)
    rng = np.random.default_rng(seed)
    gamma = np.exp(2j * np.pi * rng.random())
    h = ConvexHomotopy(start_sys, target, gamma)
    results = track_many(h, starts, opts, workers)
    counts = {}
    for r in results:
        counts[r.status] = counts.get(r.status, 0) + 1
    sols = refine_and_dedup(
        target, [r.endpoint for r in results if r.status == "success"], opts
    )
    sols.path_counts = counts
    return sols
