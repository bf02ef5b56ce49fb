"""Log barriers, the closed-form proximity operator and its derivatives.

The proximity operator handled here is that of the ball barrier
``B(w) = -ln(R^2 - ||w||^2)`` with ``R^2 = 2 Gamma n0 tan^2(phi)``:

    prox_{gamma upsilon B}(w0) = s * w0,   s = (R^2 - chi^2) / (R^2 - chi^2 + 2 gamma upsilon)

where ``chi = ||prox(w0)||`` is the root in ``[0, R)`` of

    chi^3 - r chi^2 - (R^2 + a) chi + R^2 r = 0,   r = ||w0||,  a = 2 gamma upsilon.

The CI log barrier ``-ln(-g1) - ln(-g2)`` is provided by ``barrier_value``.
"""

from dataclasses import dataclass

import numpy as np

from rslp.errors import DomainError, NumericalError, ParameterError
from rslp.geometry import CiInstance, combined_margin, constraint_margins

BISECTION_TOL = 1e-12
BISECTION_MAX_ITER = 200
BOUNDARY_GUARD = 1e-9
NUDGE = 1.0 - 1e-6


@dataclass(frozen=True)
class BarrierParams:
    """Step size ``gamma``, barrier weight ``upsilon`` and linear multiplier ``lam``."""

    gamma: float
    upsilon: float
    lam: float = 0.0

    def __post_init__(self):
        if not (self.gamma >= 0 and self.upsilon >= 0):
            raise ParameterError("gamma and upsilon must be nonnegative")
        if not np.isfinite(self.lam):
            raise ParameterError("lam must be finite")


def ball_radius_sq(inst):
    """``R^2 = 2 Gamma n0 tan^2(phi)``."""
    return 2.0 * inst.gamma * inst.n0 * inst.tan_phi**2


def barrier_value(inst, w2):
    """CI log barrier ``-ln(-g1) - ln(-g2)``; ``+inf`` outside the interior."""
    g1, g2 = constraint_margins(inst, w2)
    if g1 >= 0 or g2 >= 0:
        return np.inf
    return float(-np.log(-g1) - np.log(-g2))


def ball_barrier(inst, w2):
    """``-ln(R^2 - ||w2||^2)``; ``+inf`` outside the open ball."""
    gap = ball_radius_sq(inst) - float(np.dot(w2, w2))
    return float(-np.log(gap)) if gap > 0 else np.inf


def prox_objective(inst, w0, w, gamma, upsilon):
    """``0.5 ||w0 - w||^2 + gamma upsilon B(w)`` with the ball barrier."""
    d = np.asarray(w0) - np.asarray(w)
    return 0.5 * float(d @ d) + gamma * upsilon * ball_barrier(inst, w)


def cubic(chi, r, R2, a):
    return chi**3 - r * chi**2 - (R2 + a) * chi + R2 * r


def chi_bisection(r, R2, a, tol=BISECTION_TOL, max_iter=BISECTION_MAX_ITER):
    """Root of the prox cubic in ``[0, R)`` by bisection (scalar)."""
    lo, hi = 0.0, float(np.sqrt(R2))
    if cubic(lo, r, R2, a) <= 0:
        return 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if cubic(mid, r, R2, a) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _chi(r, R2, a):
    """Vectorized middle root of the prox cubic (trigonometric Cardano + Newton)."""
    r, R2, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, R2, a)))
    b, c, d = -r, -(R2 + a), R2 * r
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    with np.errstate(invalid="ignore", divide="ignore"):
        m = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
        chi = m * np.cos(np.arccos(arg) / 3.0 - 2.0 * np.pi / 3.0) - b / 3.0
    R = np.sqrt(R2)
    chi = np.where(np.isfinite(chi), np.clip(chi, 0.0, R), 0.5 * R)
    for _ in range(3):
        f = cubic(chi, r, R2, a)
        fp = 3.0 * chi**2 - 2.0 * r * chi - (R2 + a)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.where(fp < 0, f / fp, 0.0)
        chi = np.clip(chi - step, 0.0, R)
    chi = np.where(r == 0, 0.0, chi)
    scale = np.maximum(R2 * R, 1.0)
    bad = ~(np.abs(cubic(chi, r, R2, a)) <= 1e-12 * scale) | (chi >= R)
    if np.any(bad):
        flat = chi.reshape(-1).copy()
        for k in np.flatnonzero(bad.reshape(-1)):
            flat[k] = chi_bisection(r.flat[k], R2.flat[k], a.flat[k])
        chi = flat.reshape(chi.shape)
        if np.any(chi >= R) or not np.all(np.isfinite(chi)):
            raise NumericalError("prox cubic has no root inside the ball")
    return chi


def _gap(chi, r, R2, a):
    """``R^2 - chi^2``, taken from the stationarity relation near the sphere.

    ``chi (gap + a) = r gap`` gives ``gap = a chi / (r - chi)``, which avoids
    cancellation when ``chi`` is close to ``R`` and ``r`` is well above ``chi``.
    """
    direct = R2 - chi**2
    far = (r - chi) > 1e-3 * r
    with np.errstate(invalid="ignore", divide="ignore"):
        alt = a * chi / np.where(far, r - chi, 1.0)
    return np.where(far & (direct < 0.5 * R2), alt, direct)


def prox_scale(r, R2, a):
    """Scaling factor ``s`` of the prox for input norms ``r`` (vectorized)."""
    r, R2, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, R2, a)))
    gap = _gap(_chi(r, R2, a), r, R2, a)
    return gap / (gap + a)


def prox_scale_grads(r, R2, a):
    """``(s, ds/dr, ds/da)`` with total derivatives through ``chi`` (vectorized)."""
    r, R2, a = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, R2, a)))
    chi = _chi(r, R2, a)
    gap = _gap(chi, r, R2, a)
    D = gap + a
    s = gap / D
    f_chi = 3.0 * chi**2 - 2.0 * r * chi - (R2 + a)
    dchi_dr = gap / (-f_chi)
    dchi_da = chi / f_chi
    ds_dchi = -2.0 * chi * a / D**2
    ds_dr = ds_dchi * dchi_dr
    ds_da = -gap / D**2 + ds_dchi * dchi_da
    return s, ds_dr, ds_da


def _check_weights(gamma, upsilon):
    if gamma < 0 or upsilon < 0:
        raise ParameterError("gamma and upsilon must be nonnegative")


def solve_chi(inst, w2, gamma, upsilon):
    """Norm of the prox output: root of the prox cubic in ``[0, R)``."""
    _check_weights(gamma, upsilon)
    r = float(np.linalg.norm(w2))
    R2 = ball_radius_sq(inst)
    a = 2.0 * gamma * upsilon
    if a == 0:
        if r >= np.sqrt(R2):
            raise NumericalError("zero barrier weight and input outside the ball")
        return r
    return float(_chi(r, R2, a))


def prox_barrier(inst, w2, gamma, upsilon):
    """Proximity operator of ``gamma * upsilon * B`` at ``w2`` (radial scaling)."""
    _check_weights(gamma, upsilon)
    w2 = np.asarray(w2, dtype=float)
    R2 = ball_radius_sq(inst)
    a = 2.0 * gamma * upsilon
    r = float(np.linalg.norm(w2))
    if a == 0:
        if r >= np.sqrt(R2):
            raise DomainError("zero barrier weight and input outside the ball")
        return w2.copy()
    return float(prox_scale(r, R2, a)) * w2


def _interior_point(inst, w2):
    w2 = np.asarray(w2, dtype=float)
    margin = combined_margin(inst, w2)
    if margin > 0:
        raise DomainError(f"point violates the combined constraint (margin {margin:.3g})")
    if margin > -BOUNDARY_GUARD:
        w2 = w2 * NUDGE
    return w2


def prox_jacobians(inst, w2, gamma, upsilon):
    """Derivatives of the prox output: ``(J_w, d_upsilon, d_gamma)``.

    ``J_w = s I + (ds/dr) w0 w0' / r`` is symmetric; the weight derivatives
    share the factor ``(ds/da) w0`` and differ by ``2 gamma`` versus ``2 upsilon``.
    """
    _check_weights(gamma, upsilon)
    w0 = _interior_point(inst, w2)
    r = float(np.linalg.norm(w0))
    R2 = ball_radius_sq(inst)
    a = 2.0 * gamma * upsilon
    if a == 0 and r >= np.sqrt(R2):
        raise DomainError("zero barrier weight and input outside the ball")
    s, ds_dr, ds_da = (float(v) for v in prox_scale_grads(r, R2, a))
    J = s * np.eye(w0.size)
    if r > 0:
        J += ds_dr * np.outer(w0, w0) / r
    d_upsilon = 2.0 * gamma * ds_da * w0
    d_gamma = 2.0 * upsilon * ds_da * w0
    return J, d_upsilon, d_gamma


def update_step(inst, w2, params):
    """One proximal-gradient step on ``||w2||^2 + lam 1'w2`` plus the barrier.

    ``inst`` may be a single CiInstance or the list of a slot's users; the
    prox is then applied once per user in index order.
    """
    users = [inst] if isinstance(inst, CiInstance) else list(inst)
    w2 = np.asarray(w2, dtype=float)
    w = (1.0 - 2.0 * params.gamma) * w2 - params.gamma * params.lam
    for user in users:
        w = prox_barrier(user, w, params.gamma, params.upsilon)
    return w
