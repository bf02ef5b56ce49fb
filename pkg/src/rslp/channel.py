"""Rayleigh channels, CSI errors, QPSK frames and the rotated channel.

Channels are stored as complex arrays of shape ``(N, K, M)``: sample, user,
antenna.  The rotated channel of user ``i`` for a symbol frame with phases
``phi`` is ``h_hat_i = h_i * sum_k exp(j(phi_k - phi_i))`` and its real
stacking is ``psi_i = [Re h_hat_i; Im h_hat_i]``.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rslp.errors import DimensionError, FormatError, ModulationError, ParameterError

QPSK_PHASES = np.pi / 4 + np.pi / 2 * np.arange(4)

# Gray mapping: two bits -> quadrant index into QPSK_PHASES.
_GRAY = {(0, 0): 0, (0, 1): 1, (1, 1): 2, (1, 0): 3}

DATASET_MAGIC = b"SLPD"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sIIIQQ")


@dataclass(frozen=True)
class ChannelSet:
    """``N`` channel matrices ``H`` of shape ``(K, M)`` stacked as ``samples``."""

    samples: np.ndarray
    M: int
    K: int
    seed: int

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise DimensionError(f"need M, K >= 1, got M={self.M}, K={self.K}")
        if self.samples.ndim != 3 or self.samples.shape[1:] != (self.K, self.M):
            raise DimensionError(
                f"samples must have shape (N, {self.K}, {self.M}), got {self.samples.shape}"
            )

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class CsiError:
    """One error realization ``e`` with ``||e|| <= delta``."""

    e: np.ndarray
    delta: float


@dataclass(frozen=True)
class SymbolFrame:
    """Unit-modulus symbols ``d`` for the K users of one slot."""

    d: np.ndarray

    @property
    def phases(self):
        return np.mod(np.angle(self.d), 2 * np.pi)

    @classmethod
    def from_phases(cls, phases):
        return cls(np.exp(1j * np.asarray(phases, dtype=float)))

    @classmethod
    def from_bits(cls, bits):
        """Gray-map a flat bit sequence (two bits per user) to QPSK symbols."""
        bits = np.asarray(bits, dtype=int).reshape(-1, 2)
        idx = [_GRAY[tuple(b)] for b in bits]
        return cls.from_phases(QPSK_PHASES[idx])


def _check_dims(M, K, N=0):
    if int(M) != M or int(K) != K or int(N) != N:
        raise DimensionError("dimensions must be integers")
    if M < 1 or K < 1 or N < 0:
        raise DimensionError(f"need M, K >= 1 and N >= 0, got M={M}, K={K}, N={N}")


def generate_channels(M, K, N, seed):
    """Draw ``N`` i.i.d. Rayleigh channels with unit-variance CN(0, 1) entries."""
    _check_dims(M, K, N)
    rng = np.random.default_rng(seed)
    re = rng.standard_normal((N, K, M))
    im = rng.standard_normal((N, K, M))
    return ChannelSet((re + 1j * im) / np.sqrt(2.0), int(M), int(K), int(seed))


def _ball_samples(dim, delta, size, rng):
    """Uniform samples from the closed real ``dim``-ball of radius ``delta``."""
    g = rng.standard_normal((size, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    # work in the unit ball so that tiny radii do not underflow the norms
    x = g / norms * rng.random((size, 1)) ** (1.0 / dim)
    # Rounding may push a boundary draw a few ulps out; pull it back in.
    n = np.linalg.norm(x, axis=1, keepdims=True)
    x = np.where(n > 1.0 - 1e-15, x / np.maximum(n, 1.0) * (1.0 - 1e-15), x)
    return x * delta


def sample_csi_errors(M, delta, size, rng):
    """``size`` complex error vectors uniform in the ball ``||e|| <= delta``."""
    if delta < 0 or not np.isfinite(delta):
        raise ParameterError(f"error bound must be finite and >= 0, got {delta}")
    _check_dims(M, 1)
    if delta == 0:
        return np.zeros((size, M), dtype=complex)
    x = _ball_samples(2 * M, float(delta), size, rng)
    return x[:, :M] + 1j * x[:, M:]


def sample_csi_error(M, delta, seed):
    """One CSI error realization drawn uniformly from the ``delta``-ball."""
    rng = np.random.default_rng(seed)
    return CsiError(sample_csi_errors(M, delta, 1, rng)[0], float(delta))


def random_phases(N, K, rng, exclude_null_frames=True):
    """QPSK phases of shape ``(N, K)``.

    With ``exclude_null_frames`` the slots whose phasor sum vanishes are
    redrawn: there every rotated channel is zero and no precoder can place
    the received points in their CI regions.
    """
    idx = rng.integers(0, 4, size=(N, K))
    if exclude_null_frames:
        while True:
            bad = np.abs(np.exp(1j * QPSK_PHASES[idx]).sum(axis=1)) < 1e-9
            if not bad.any():
                break
            idx[bad] = rng.integers(0, 4, size=(int(bad.sum()), K))
    return QPSK_PHASES[idx]


def rotation_factors(phases):
    """``sum_k exp(j(phi_k - phi_i))`` for each user; phases has shape (..., K)."""
    d = np.exp(1j * np.asarray(phases, dtype=float))
    return d.sum(axis=-1, keepdims=True) * np.conj(d)


def build_rotated_channel(h, frame, i):
    """Rotated channel ``h_hat_i`` of user ``i`` for the given frame."""
    d = np.asarray(frame.d, dtype=complex)
    if not np.allclose(np.abs(d), 1.0, rtol=0, atol=1e-12):
        raise ModulationError("all symbols must have unit modulus")
    if not 0 <= i < d.size:
        raise DimensionError(f"user index {i} out of range for K={d.size}")
    factor = (d.sum() * np.conj(d[i]))
    return np.asarray(h, dtype=complex) * factor


def rotate_channels(H, phases):
    """Rotated channels for every user; ``H`` is (..., K, M), phases (..., K)."""
    return np.asarray(H) * rotation_factors(phases)[..., None]


def stack_real(h_hat):
    """Real stacking ``[Re; Im]`` along the last axis."""
    h_hat = np.asarray(h_hat)
    return np.concatenate([h_hat.real, h_hat.imag], axis=-1)


def unstack_real(x):
    x = np.asarray(x, dtype=float)
    m = x.shape[-1] // 2
    return x[..., :m] + 1j * x[..., m:]


def write_dataset(path, channels):
    """Write a ChannelSet in the little-endian SLPD format."""
    data = np.ascontiguousarray(channels.samples, dtype="<c8")
    header = _HEADER.pack(
        DATASET_MAGIC, DATASET_VERSION, channels.M, channels.K, len(channels), channels.seed
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_dataset(path):
    """Read an SLPD file back into a ChannelSet (complex128 in memory)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("truncated dataset header", len(raw))
    magic, version, M, K, N, seed = _HEADER.unpack_from(raw, 0)
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {version}", 4)
    expected = N * K * M * 8
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise FormatError(
            f"payload has {len(body)} bytes, header implies {expected}",
            _HEADER.size + min(len(body), expected),
        )
    samples = np.frombuffer(body, dtype="<c8").reshape(N, K, M).astype(complex)
    return ChannelSet(samples, int(M), int(K), int(seed))
