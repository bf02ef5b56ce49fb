"""Real-valued constructive-interference (CI) constraint geometry.

For a user with stacked rotated channel ``psi`` and a real-stacked precoder
``w2 = [Re w; Im w]`` the two robust CI constraints are

    g1 = psi' Q1 w2 + delta ||Q1 w2|| + sqrt(Gamma n0) tan(phi) <= 0
    g2 = -psi' Q2 w2 + delta ||Q2 w2|| + sqrt(Gamma n0) tan(phi) <= 0

with ``Q1 = Theta - tan(phi) I`` and ``Q2 = Theta + tan(phi) I``.  Because
``||Q w2|| = sqrt(1 + tan^2 phi) ||w2||`` both read ``a' w2 + delta' ||w2|| + c``
with ``a1 = Q1' psi``, ``a2 = -Q2' psi`` and ``delta' = delta sqrt(1 + tan^2 phi)``.
The noiseless received point is ``z = h_hat^H w`` so that ``Re z = psi' w2``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from rslp.channel import rotate_channels, stack_real
from rslp.errors import DimensionError, GeometryError, ParameterError

QPSK_HALF_ANGLE = np.pi / 4


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def check_phi(phi):
    if not 0.0 < phi < np.pi / 2:
        raise GeometryError(f"CI half-angle must lie in (0, pi/2), got {phi}")


def theta_matrix(M):
    """Skew orthogonal block ``[[0, -I], [I, 0]]`` of size 2M."""
    eye = np.eye(M)
    zero = np.zeros((M, M))
    return np.block([[zero, -eye], [eye, zero]])


def rotate_quarter(x):
    """``Theta' x`` for stacked vectors along the last axis (cheap form)."""
    m = x.shape[-1] // 2
    return np.concatenate([x[..., m:], -x[..., :m]], axis=-1)


@dataclass(frozen=True)
class PrecoderVec:
    """Real-stacked precoder ``w2 = [Re w; Im w]``."""

    w2: np.ndarray

    @classmethod
    def from_complex(cls, w):
        return cls(stack_real(np.asarray(w, dtype=complex)))

    @property
    def complex(self):
        m = self.w2.shape[-1] // 2
        return self.w2[..., :m] + 1j * self.w2[..., m:]

    @property
    def power(self):
        return float(self.w2 @ self.w2)


@dataclass(frozen=True)
class CiInstance:
    """CI constraint data of one user in one symbol slot."""

    psi: np.ndarray
    gamma: float
    delta: float = 0.0
    phi: float = QPSK_HALF_ANGLE
    n0: float = 1.0

    def __post_init__(self):
        check_phi(self.phi)
        if self.delta < 0:
            raise ParameterError(f"error bound must be >= 0, got {self.delta}")
        if self.psi.ndim != 1 or self.psi.size % 2:
            raise DimensionError("psi must be a real vector of even length 2M")

    @property
    def M(self):
        return self.psi.size // 2

    @property
    def tan_phi(self):
        return float(np.tan(self.phi))

    @property
    def threshold(self):
        """``sqrt(Gamma n0) tan(phi)``: margin of the zero precoder."""
        return float(np.sqrt(self.gamma * self.n0) * self.tan_phi)

    @cached_property
    def theta(self):
        return theta_matrix(self.M)

    @cached_property
    def q1(self):
        return self.theta - self.tan_phi * np.eye(2 * self.M)

    @cached_property
    def q2(self):
        return self.theta + self.tan_phi * np.eye(2 * self.M)

    @cached_property
    def g(self):
        return self.q1.T @ self.q1 + self.q2.T @ self.q2


def build_instance(h_hat, gamma_db, delta, phi=QPSK_HALF_ANGLE, n0=1.0):
    """CI instance for a rotated complex channel ``h_hat``."""
    if not np.isfinite(gamma_db):
        raise ParameterError("SINR target must be finite")
    check_phi(phi)
    psi = stack_real(np.asarray(h_hat, dtype=complex).ravel())
    return CiInstance(psi, float(db_to_linear(gamma_db)), float(delta), float(phi), float(n0))


def _vec(w2):
    return np.asarray(w2.w2 if isinstance(w2, PrecoderVec) else w2, dtype=float)


def constraint_margins(inst, w2):
    """Left-hand sides ``(g1, g2)``; feasible iff both are <= 0."""
    w = _vec(w2)
    q1w = inst.q1 @ w
    q2w = inst.q2 @ w
    g1 = inst.psi @ q1w + inst.delta * np.linalg.norm(q1w) + inst.threshold
    g2 = -inst.psi @ q2w + inst.delta * np.linalg.norm(q2w) + inst.threshold
    return float(g1), float(g2)


def combined_margin(inst, w2):
    """Scalar bound merging both constraints, quadratic in ``w2``.

    ``(delta^2 - psi'psi) * 2(1 + tan^2 phi) ||w2||^2
    + 4 tan(phi) sqrt(Gamma n0) psi'w2 - 2 Gamma n0 tan^2 phi``
    """
    w = _vec(w2)
    t = inst.tan_phi
    lead = (inst.delta**2 - inst.psi @ inst.psi) * 2.0 * (1.0 + t * t)
    return float(
        lead * (w @ w)
        + 4.0 * t * np.sqrt(inst.gamma * inst.n0) * (inst.psi @ w)
        - 2.0 * inst.gamma * inst.n0 * t * t
    )


def ci_region_check(h_hat, w, gamma, n0=1.0, phi=QPSK_HALF_ANGLE, tol=1e-12):
    """True iff the noiseless point ``h_hat^H w`` lies in the CI sector."""
    check_phi(phi)
    z = np.vdot(np.asarray(h_hat, dtype=complex), np.asarray(w, dtype=complex))
    root = np.sqrt(gamma * n0)
    margin = abs(z.imag) - (z.real - root) * np.tan(phi)
    return bool(margin <= tol * max(1.0, root))


class SlotBatch:
    """Vectorized CI data for ``S`` slots of ``K`` users each.

    ``psi`` has shape (S, K, 2M); ``gamma`` (linear SINR) and ``delta``
    broadcast to (S,).
    """

    def __init__(self, psi, gamma, delta=0.0, phi=QPSK_HALF_ANGLE, n0=1.0):
        psi = np.asarray(psi, dtype=float)
        if psi.ndim == 2:
            psi = psi[None]
        if psi.ndim != 3 or psi.shape[-1] % 2:
            raise DimensionError(f"psi must have shape (S, K, 2M), got {psi.shape}")
        check_phi(phi)
        self.psi = psi
        S = psi.shape[0]
        self.gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (S,)).copy()
        self.delta = np.broadcast_to(np.asarray(delta, dtype=float), (S,)).copy()
        if np.any(self.delta < 0):
            raise ParameterError("error bounds must be >= 0")
        self.phi = float(phi)
        self.n0 = float(n0)

    @classmethod
    def from_channels(cls, H, phases, snr_db, delta=0.0, phi=QPSK_HALF_ANGLE, n0=1.0):
        psi = stack_real(rotate_channels(H, phases))
        return cls(psi, db_to_linear(snr_db), delta, phi, n0)

    @classmethod
    def from_instances(cls, instances):
        """One slot built from a list of per-user CiInstance objects."""
        first = instances[0]
        psi = np.stack([inst.psi for inst in instances])[None]
        return cls(psi, first.gamma, first.delta, first.phi, first.n0)

    def __len__(self):
        return self.psi.shape[0]

    def subset(self, idx):
        return SlotBatch(self.psi[idx], self.gamma[idx], self.delta[idx], self.phi, self.n0)

    def instances(self, s):
        return [
            CiInstance(p.copy(), float(self.gamma[s]), float(self.delta[s]), self.phi, self.n0)
            for p in self.psi[s]
        ]

    @property
    def K(self):
        return self.psi.shape[1]

    @property
    def M(self):
        return self.psi.shape[2] // 2

    @property
    def tan_phi(self):
        return float(np.tan(self.phi))

    @property
    def root_gamma(self):
        """``sqrt(Gamma n0)`` per slot."""
        return np.sqrt(self.gamma * self.n0)

    @property
    def threshold(self):
        return self.root_gamma * self.tan_phi

    @property
    def delta_eff(self):
        """Error bound seen by ``||w2||``: ``delta sqrt(1 + tan^2 phi)``."""
        return self.delta * np.sqrt(1.0 + self.tan_phi**2)

    @cached_property
    def vectors(self):
        """Constraint normals ``a`` of shape (S, K, 2, 2M): ``[Q1'psi, -Q2'psi]``."""
        t = self.tan_phi
        rot = rotate_quarter(self.psi)
        a1 = rot - t * self.psi
        a2 = -rot - t * self.psi
        return np.stack([a1, a2], axis=2)

    def margins(self, w2):
        """All 2K margins, shape (S, K, 2), for precoders ``w2`` of shape (S, 2M)."""
        w2 = np.asarray(w2, dtype=float)
        lin = np.einsum("skjn,sn->skj", self.vectors, w2)
        norm = np.linalg.norm(w2, axis=-1)
        return lin + (self.delta_eff * norm + self.threshold)[:, None, None]

    def max_margin(self, w2):
        return self.margins(w2).reshape(len(self), -1).max(axis=1)
