"""Log-barrier interior-point baseline for robust SLP power minimization.

The slot problem is

    minimize ||w2||^2  subject to  a_j' w2 + delta' ||w2|| + sqrt(Gamma n0) tan(phi) <= 0

for the 2K constraint normals ``a_j`` of the K users.  Each sample is first
rescaled so that the threshold is ``tan(phi)`` and the largest normal has unit
length; the barrier subproblems ``||u||^2 - upsilon sum_j ln(-g_j)`` are then
minimized by damped Newton steps with Armijo backtracking while upsilon is
shrunk geometrically.  All samples of a batch are solved together.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, linprog

from rslp.errors import DimensionError, InfeasibleError, ParameterError
from rslp.geometry import PrecoderVec, SlotBatch

ARMIJO_C = 1e-4
MAX_BACKTRACK = 60
MAX_DOUBLINGS = 60
DECREMENT_TOL = 1e-20
START_MARGIN = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    upsilon0: float = 1.0
    shrink: float = 0.2
    inner_tol: float = 1e-8
    max_outer: int = 12
    max_inner: int = 500
    interior_margin: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.shrink < 1.0:
            raise ParameterError(f"shrink must lie in (0, 1), got {self.shrink}")
        if self.upsilon0 <= 0 or self.inner_tol <= 0:
            raise ParameterError("upsilon0 and inner_tol must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ParameterError("iteration limits must be positive")

    @property
    def final_upsilon(self):
        return self.upsilon0 * self.shrink ** (self.max_outer - 1)


@dataclass
class BatchSolution:
    """Per-sample results of ``solve_batch``; failed samples have ``ok`` False."""

    w: np.ndarray
    power: np.ndarray
    iterations: np.ndarray
    ok: np.ndarray
    max_margin: np.ndarray
    grad_norm: np.ndarray
    history: np.ndarray


@dataclass
class SolveResult:
    w2: PrecoderVec
    power: float
    iterations: int
    max_margin: float
    grad_norm: float
    history: list = field(default_factory=list)


@dataclass
class CertReport:
    """Recomputed margins of a candidate precoder for one slot."""

    max_margin: float
    power: float
    slacks: np.ndarray
    feasible: bool


class _Normalized:
    """Batch rescaled to unit threshold-per-tan and unit largest normal."""

    def __init__(self, batch):
        A = batch.vectors.reshape(len(batch), -1, 2 * batch.M)
        self.rho = np.linalg.norm(A, axis=-1).max(axis=1)
        if np.any(self.rho == 0):
            raise DimensionError("a slot has an all-zero rotated channel")
        self.A = A / self.rho[:, None, None]
        self.d = batch.delta_eff / self.rho
        self.t = batch.tan_phi
        self.unit = batch.root_gamma / self.rho  # w2 = unit * u

    def subset(self, idx):
        out = object.__new__(_Normalized)
        out.A, out.d, out.rho, out.unit = self.A[idx], self.d[idx], self.rho[idx], self.unit[idx]
        out.t = self.t
        return out

    def margins(self, u):
        return np.einsum("smn,sn->sm", self.A, u) + (
            self.d * np.linalg.norm(u, axis=-1)
        )[:, None] + self.t


def _barrier_objective(norm, u, ups):
    g = norm.margins(u)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.einsum("sn,sn->s", u, u) - ups * np.log(-g).sum(axis=1)
    return np.where((g < 0).all(axis=1), val, np.inf)


def _grad_hess(norm, u, ups):
    S, m, n = norm.A.shape
    g = norm.margins(u)
    r = np.linalg.norm(u, axis=-1)
    uh = u / r[:, None]
    G = norm.A + norm.d[:, None, None] * uh[:, None, :]
    inv = 1.0 / (-g)
    grad = 2.0 * u + ups * np.einsum("sm,smn->sn", inv, G)
    H = np.einsum("sm,smi,smj->sij", inv**2, G, G)
    curv = norm.d * inv.sum(axis=1) / r
    H += curv[:, None, None] * (np.eye(n) - np.einsum("si,sj->sij", uh, uh))
    H = 2.0 * np.eye(n) + ups * H
    return grad, H


def _newton_direction(H, grad):
    """``-H^{-1} grad``; falls back to an eigen solve with eigenvalues clipped
    at 2 (the Hessian is ``2I`` plus a PSD term) when roundoff makes ``H``
    numerically singular."""
    try:
        return -np.linalg.solve(H, grad[..., None])[..., 0]
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(H)
        coef = np.einsum("sji,sj->si", V, grad) / np.maximum(lam, 2.0)
        return -np.einsum("sij,sj->si", V, coef)


def _newton_stage(norm, u, ups, opts):
    """Minimize the barrier subproblem for every sample; returns (u, iters, grad norm)."""
    S = u.shape[0]
    iters = np.zeros(S, dtype=int)
    gnorm = np.full(S, np.inf)
    active = np.ones(S, dtype=bool)
    for _ in range(opts.max_inner):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        sub = norm.subset(idx)
        ui = u[idx]
        grad, H = _grad_hess(sub, ui, ups)
        gnorm[idx] = np.linalg.norm(grad, axis=1)
        step = _newton_direction(H, grad)
        slope = np.einsum("sn,sn->s", grad, step)
        f0 = _barrier_objective(sub, ui, ups)
        # The Newton decrement bounds the remaining suboptimality.
        done = (gnorm[idx] <= opts.inner_tol) | (-slope <= DECREMENT_TOL * np.maximum(1.0, np.abs(f0)))
        size = np.ones(idx.size)
        accepted = done.copy()
        for _ in range(MAX_BACKTRACK):
            pending = ~accepted
            if not pending.any():
                break
            trial = ui + size[:, None] * step
            f1 = _barrier_objective(sub, trial, ups)
            good = pending & (f1 <= f0 + ARMIJO_C * size * slope) & (f1 < f0)
            ui = np.where(good[:, None], trial, ui)
            accepted |= good
            size = np.where(pending & ~good, 0.5 * size, size)
        # A line search that cannot improve means roundoff has been reached.
        stalled = ~accepted
        u[idx] = ui
        iters[idx] += (~done & ~stalled).astype(int)
        active[idx] = ~(done | stalled)
    return u, iters, gnorm


def _lp_direction(A, d):
    """Phase-I LP: a direction with a_j'u + d ||u||_1 < 0 for all j, or None."""
    m, n = A.shape
    # variables: u (n), z (n) with |u| <= z <= 1, tau; minimize tau
    c = np.zeros(2 * n + 1)
    c[-1] = 1.0
    rows = [np.hstack([A, d * np.ones((m, n)), -np.ones((m, 1))])]
    eye = np.eye(n)
    rows.append(np.hstack([eye, -eye, np.zeros((n, 1))]))
    rows.append(np.hstack([-eye, -eye, np.zeros((n, 1))]))
    A_ub = np.vstack(rows)
    b_ub = np.zeros(A_ub.shape[0])
    bounds = [(-1, 1)] * n + [(0, 1)] * n + [(None, None)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizeWarning)
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] >= -1e-12:
        return None
    return res.x[:n]


def _scale_into_interior(norm, direction, target):
    """Double the scale of each unit direction until all margins are below -target."""
    S = direction.shape[0]
    found = np.zeros(S, dtype=bool)
    u = np.zeros_like(direction)
    best = np.full(S, np.inf)
    scale = np.full(S, 1e-6)
    for _ in range(MAX_DOUBLINGS + 1):
        trial = scale[:, None] * direction
        worst = norm.margins(trial).max(axis=1)
        best = np.minimum(best, worst)
        hit = ~found & (worst < -target)
        u[hit] = trial[hit]
        found |= hit
        if found.all():
            break
        scale *= 2.0
    return u, found, best


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, n, out=np.zeros_like(v), where=n > 0)


def _feasible_start(norm, target):
    """Strictly feasible normalized points; returns (u, found, best max margin)."""
    S, m, n = norm.A.shape
    mf = _unit(-norm.A.sum(axis=1))
    u, found, best = _scale_into_interior(norm, mf, target)
    todo = np.flatnonzero(~found)
    if todo.size:
        zf = np.stack([np.linalg.lstsq(norm.A[s], -np.ones(m), rcond=None)[0] for s in todo])
        sub = norm.subset(todo)
        u2, f2, b2 = _scale_into_interior(sub, _unit(zf), target[todo])
        u[todo[f2]] = u2[f2]
        found[todo] = f2
        best[todo] = np.minimum(best[todo], b2)
    for s in np.flatnonzero(~found):
        direction = _lp_direction(norm.A[s], norm.d[s])
        if direction is None:
            continue
        sub = norm.subset([s])
        u3, f3, b3 = _scale_into_interior(sub, _unit(direction[None]), target[[s]])
        if f3[0]:
            u[s] = u3[0]
            found[s] = True
        best[s] = min(best[s], b3[0])
    return u, found, best


def _start_target(batch):
    """Normalized margin that maps to -START_MARGIN (or tighter) in physical units."""
    return START_MARGIN * np.maximum(1.0, 1.0 / batch.root_gamma)


def find_feasible_start(instances):
    """A strictly feasible precoder for one slot (all margins below -1e-6).

    Scales the matched-filter direction, then a zero-forcing direction and
    finally a phase-I LP direction, doubling the scale up to 60 times.
    """
    if not instances:
        raise DimensionError("at least one user instance is required")
    batch = SlotBatch.from_instances(instances)
    norm = _Normalized(batch)
    u, found, best = _feasible_start(norm, _start_target(batch))
    if not found[0]:
        raise InfeasibleError(
            "no strictly feasible precoder found", best[0] * batch.root_gamma[0]
        )
    return PrecoderVec(u[0] * norm.unit[0])


def _push_inside(batch, w, margin):
    """Scale each precoder up just enough for every margin to be <= -margin.

    ``g(k w) = k (g(w) - c) + c`` with ``c`` the threshold, so the factor is
    ``(c + margin) / (c - max g)``; the power grows by about ``2 margin / c``.
    """
    if len(batch) == 0:
        return w
    c = batch.threshold
    worst = batch.max_margin(w)
    target = 1.01 * margin  # headroom for rounding in the recomputed margins
    factor = np.where(worst > -margin, (c + target) / (c - worst), 1.0)
    return w * factor[:, None]


def solve_batch(batch, opts=None):
    """Solve every slot of a SlotBatch; infeasible slots are flagged, not raised."""
    opts = opts or SolverOptions()
    S = len(batch)
    norm = _Normalized(batch)
    u, ok, best = _feasible_start(norm, _start_target(batch))
    iterations = np.zeros(S, dtype=int)
    history = np.full((S, opts.max_outer), np.nan)
    gnorm = np.full(S, np.nan)
    idx = np.flatnonzero(ok)
    if idx.size:
        sub = norm.subset(idx)
        ui = u[idx].copy()
        ups = opts.upsilon0
        for stage in range(opts.max_outer):
            ui, it, gn = _newton_stage(sub, ui, ups, opts)
            iterations[idx] += it
            gnorm[idx] = gn
            history[idx, stage] = np.einsum("sn,sn->s", ui, ui) * sub.unit**2
            ups *= opts.shrink
        u[idx] = ui
    w = u * norm.unit[:, None]
    w[ok] = _push_inside(batch.subset(ok), w[ok], opts.interior_margin)
    w[~ok] = np.nan
    power = np.where(ok, np.einsum("sn,sn->s", w, w), np.nan)
    max_margin = np.where(ok, batch.max_margin(np.where(ok[:, None], w, 0.0)), best * batch.root_gamma)
    return BatchSolution(w, power, iterations, ok, max_margin, gnorm, history)


def solve_slp(instances, opts=None):
    """Minimum-power robust CI precoder for one slot given its per-user instances.

    Raises InfeasibleError (carrying the largest violated margin) when no
    strictly feasible start exists.
    """
    if not instances:
        raise DimensionError("at least one user instance is required")
    sol = solve_batch(SlotBatch.from_instances(instances), opts)
    if not sol.ok[0]:
        raise InfeasibleError("robust CI constraints are infeasible", sol.max_margin[0])
    return SolveResult(
        PrecoderVec(sol.w[0]),
        float(sol.power[0]),
        int(sol.iterations[0]),
        float(sol.max_margin[0]),
        float(sol.grad_norm[0]),
        [float(p) for p in sol.history[0]],
    )


def certify(instances, w2):
    """Recompute margins and power of ``w2`` for the slot's users."""
    w = np.asarray(w2.w2 if isinstance(w2, PrecoderVec) else w2, dtype=float)
    batch = SlotBatch.from_instances(instances)
    slacks = batch.margins(w[None])[0]
    worst = float(slacks.max())
    return CertReport(worst, float(w @ w), slacks, worst < 0)
