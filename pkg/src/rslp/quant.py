"""Binary and ternary weight quantization, bit packing and memory accounting.

Binary weights are ``beta * sign(W)`` with ``sign(0) = +1`` and
``beta = mean |W|``.  Ternary weights use the threshold
``rho = 0.7 mean |W|``: entries with ``|W| > rho`` keep their sign, the rest
become zero, and ``beta`` is the mean magnitude of the kept entries.

Packed layout: the tensor is viewed as rows (first axis = output channel);
each row's bits are packed little-endian into bytes and padded to a byte
boundary.  Binary tensors store one plane (sign, 1 = nonnegative); ternary
tensors add a second plane marking the nonzero entries.
"""

from dataclasses import dataclass

import numba
import numpy as np
from numba import types
from numba.extending import intrinsic

from rslp.errors import DimensionError

TERNARY_RATIO = 0.7
STE_CLIP = 1.0
PRECISIONS = ("fp32", "binary", "ternary")
WEIGHT_BITS = {"binary": 1, "ternary": 2}


def pack_rows(bits):
    """Pack a 2-D boolean array row by row (little-endian, byte padded)."""
    return np.packbits(np.asarray(bits, dtype=bool), axis=1, bitorder="little")


def unpack_rows(packed, n):
    return np.unpackbits(packed, axis=1, count=n, bitorder="little").astype(bool)


def _rows(shape):
    shape = tuple(int(s) for s in shape)
    rows = shape[0] if len(shape) > 1 else 1
    return rows, int(np.prod(shape)) // max(rows, 1)


@dataclass(frozen=True)
class QuantTensor:
    """Bit-packed quantized tensor: ``values = beta * levels``."""

    kind: str
    shape: tuple
    beta: float
    sign: np.ndarray
    mask: np.ndarray = None
    rho: float = None

    @property
    def size(self):
        return int(np.prod(self.shape))

    def levels(self):
        """Integer levels in {-1, +1} (binary) or {-1, 0, +1} (ternary)."""
        rows, n = _rows(self.shape)
        lv = np.where(unpack_rows(self.sign, n), 1, -1).astype(np.int8)
        if self.mask is not None:
            lv = lv * unpack_rows(self.mask, n)
        return lv.reshape(self.shape)

    def values(self):
        return self.beta * self.levels().astype(float)

    @property
    def zero_fraction(self):
        if self.mask is None:
            return 0.0
        return 1.0 - float(np.count_nonzero(self.levels())) / self.size

    @property
    def storage_bits(self):
        return WEIGHT_BITS[self.kind] * self.size


def _as_rows(W):
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        raise DimensionError("cannot quantize an empty tensor")
    rows, n = _rows(W.shape)
    return W, W.reshape(rows, n)


def _mean(mag):
    """Correctly rounded mean (non-finite input gives the plain mean).

    The sum is formed exactly over a common power-of-two denominator and
    rounded once, so the result does not depend on summation order and
    re-quantizing ``beta * levels`` returns ``beta`` itself.
    """
    if not np.isfinite(mag).all():
        return float(np.mean(mag))
    ratios = [v.as_integer_ratio() for v in mag.ravel().tolist()]
    den = max(d for _, d in ratios)
    return sum(n * (den // d) for n, d in ratios) / (den * len(ratios))


def binarize(W):
    """Optimal binary approximation ``beta * sign(W)`` (one beta per tensor)."""
    W, M = _as_rows(W)
    beta = _mean(np.abs(W))
    return QuantTensor("binary", W.shape, beta, pack_rows(M >= 0))


def ternarize(W):
    """Threshold ternary approximation; falls back to all-nonzero levels if no
    entry exceeds the threshold."""
    W, M = _as_rows(W)
    mag = np.abs(M)
    rho = TERNARY_RATIO * _mean(mag)
    keep = mag > rho
    if not keep.any():
        keep = np.ones_like(keep)
    beta = _mean(mag[keep])
    # zeroed entries get a canonical +1 sign bit
    return QuantTensor("ternary", W.shape, beta, pack_rows((M >= 0) | ~keep), pack_rows(keep), rho)


def quantize(W, kind):
    if kind == "binary":
        return binarize(W)
    if kind == "ternary":
        return ternarize(W)
    raise ValueError(f"unknown quantization kind {kind!r}")


def quantized_values(W, kind):
    """Dense values of the quantized tensor (identity for fp32)."""
    if kind == "fp32":
        return np.asarray(W, dtype=float)
    return quantize(W, kind).values()


def ste_backward(grad_out, W_fp):
    """Straight-through estimator: pass gradients where ``|W_fp| <= 1``."""
    return np.where(np.abs(W_fp) <= STE_CLIP, grad_out, 0.0)


# -- bit-level kernels -------------------------------------------------------


@intrinsic
def _ctpop(typingctx, x):
    """LLVM population count (a single instruction on CPUs that have one)."""
    if x != types.uint64:
        return None

    def codegen(context, builder, signature, args):
        fn = builder.module.declare_intrinsic("llvm.ctpop", [args[0].type])
        return builder.call(fn, args)

    return types.uint64(types.uint64), codegen


@numba.njit(cache=True, inline="always")
def popcount64(x):
    return _ctpop(x)


def to_words(packed):
    """Re-view byte-packed rows as little-endian uint64 words (zero padded)."""
    rows, nbytes = packed.shape
    nw = -(-nbytes // 8)
    buf = np.zeros((rows, nw * 8), dtype=np.uint8)
    buf[:, :nbytes] = packed
    return buf.view("<u8").astype(np.uint64)


def _valid_words(n):
    return to_words(pack_rows(np.ones((1, n), dtype=bool)))[0]


@numba.njit(cache=True)
def _signed_sum_kernel(sign_w, mask_w, use_mask, xs_w, xabs, n, out):
    """out[o] = sum_j |x_j| (+1 if sign(w_oj) == sign(x_j) else -1) over kept j."""
    rows, nw = sign_w.shape
    for o in range(rows):
        acc = 0.0
        for k in range(nw):
            agree = ~(sign_w[o, k] ^ xs_w[k])
            keep = mask_w[o, k] if use_mask else ~np.uint64(0)
            base = k * 64
            top = min(64, n - base)
            for b in range(top):
                bit = np.uint64(1) << np.uint64(b)
                if keep & bit:
                    if agree & bit:
                        acc += xabs[base + b]
                    else:
                        acc -= xabs[base + b]
        out[o] = acc


@numba.njit(cache=True)
def _popcount_kernel(sign_w, mask_w, use_mask, xs_w, valid_w, out):
    """out[o] = sum_j w_oj x_j for x in {-1, +1} via XNOR and popcount."""
    rows, nw = sign_w.shape
    for o in range(rows):
        agree = 0
        total = 0
        for k in range(nw):
            keep = mask_w[o, k] & valid_w[k] if use_mask else valid_w[k]
            agree += popcount64(~(sign_w[o, k] ^ xs_w[k]) & keep)
            total += popcount64(keep)
        out[o] = 2 * agree - total


def packed_matvec(q, x):
    """``beta * (W_q @ x)`` computed from the packed bit planes.

    ``x`` is split into a sign plane and magnitudes; the XNOR of weight and
    input signs selects ``+|x_j|`` or ``-|x_j|``.  When every ``x_j`` is
    ``+-1`` the sum reduces to a popcount.
    """
    rows, n = _rows(q.shape)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != n:
        raise DimensionError(f"vector of length {x.size} does not match {n} columns")
    sign_w = to_words(q.sign)
    use_mask = q.mask is not None
    mask_w = to_words(q.mask) if use_mask else sign_w
    xs_w = to_words(pack_rows((x >= 0)[None]))[0]
    if np.all(np.abs(x) == 1.0):
        counts = np.zeros(rows, dtype=np.int64)
        _popcount_kernel(sign_w, mask_w, use_mask, xs_w, _valid_words(n), counts)
        return q.beta * counts.astype(float)
    out = np.zeros(rows)
    _signed_sum_kernel(sign_w, mask_w, use_mask, xs_w, np.abs(x), n, out)
    return q.beta * out


# -- memory accounting ---------------------------------------------------------


@dataclass(frozen=True)
class MemoryReport:
    """Inference storage of a model.

    ``fp_params`` counts 32-bit values (including one scale per quantized
    tensor); ``binary_params`` counts quantized weights, stored at
    ``bits_per_weight`` bits each.
    """

    fp_params: int
    binary_params: int
    megabytes: float
    ratio_vs_fp32: float
    bits_per_weight: int = 1

    @property
    def bytes(self):
        return self.megabytes * 2**20


def memory_estimate(model):
    """Memory of a model from its deployment inventory.

    ``model.inventory()`` yields ``(name, count, precision)`` for every value
    needed at inference time.
    """
    fp = 0
    quantized = 0
    bits_per_weight = 1
    scales = 0
    for _, count, precision in model.inventory():
        if precision == "fp32":
            fp += count
        else:
            quantized += count
            scales += 1
            bits_per_weight = max(bits_per_weight, WEIGHT_BITS[precision])
    total_bits = 32 * (fp + scales) + bits_per_weight * quantized
    reference_bits = 32 * (fp + quantized)
    return MemoryReport(
        fp_params=fp + scales,
        binary_params=quantized,
        megabytes=total_bits / 8 / 2**20,
        ratio_vs_fp32=reference_bits / total_bits,
        bits_per_weight=bits_per_weight if quantized else 32,
    )
