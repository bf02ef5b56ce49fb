"""Compiled inference engine and latency benchmark.

A trained UnfoldedModel is lowered to flat arrays and run by one numba
kernel that loops over the samples of a batch.  The layers differ only in
how a 3x3 convolution is evaluated:

* fp32: gather the zero-padded patch, then one multiply-accumulate dot
  product per output channel;
* binary/ternary with float inputs: each kernel row of a channel covers
  three horizontally adjacent inputs, so the eight subset sums of every
  such triple are tabulated once per layer input.  A 3-bit weight code per
  (output, channel, kernel row) then selects its partial sum with a single
  lookup; binary uses ``2 sum_{w=+} x - sum x``, ternary subtracts the
  lookup of the negative code.  No multiplies are needed, and the tables of
  the channel-state input are shared by both subnetworks and the first
  post-processing layer;
* binary/ternary with +-1 inputs (sign activations): channel-packed XNOR
  and popcount.

Batch norm is folded into a per-channel affine at compile time.
"""

import time
from dataclasses import dataclass

import numba
import numpy as np

from numba import types
from numba.extending import intrinsic

from rslp.barrier import BISECTION_MAX_ITER, BISECTION_TOL
from rslp.nn import PReLU
from rslp.quant import pack_rows, popcount64, quantize, to_words

FLOAT, BITS, XNOR = 0, 1, 2
_EMPTY_W = np.zeros((1, 1))
_EMPTY_U = np.zeros((1, 1), dtype=np.uint64)
_EMPTY_C = np.zeros((1, 1), dtype=np.uint8)


# -- scalar prox ---------------------------------------------------------------------


@numba.njit(cache=True)
def _cubic(chi, r, R2, a):
    return chi**3 - r * chi**2 - (R2 + a) * chi + R2 * r


@numba.njit(cache=True)
def _chi_scalar(r, R2, a):
    R = np.sqrt(R2)
    if r == 0.0:
        return 0.0
    b, c, d = -r, -(R2 + a), R2 * r
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    chi = 0.5 * R
    if p < 0.0:
        m = 2.0 * np.sqrt(-p / 3.0)
        arg = min(1.0, max(-1.0, 3.0 * q / (p * m)))
        val = m * np.cos(np.arccos(arg) / 3.0 - 2.0 * np.pi / 3.0) - b / 3.0
        if np.isfinite(val):
            chi = min(R, max(0.0, val))
    for _ in range(3):
        f = _cubic(chi, r, R2, a)
        fp = 3.0 * chi**2 - 2.0 * r * chi - (R2 + a)
        step = f / fp if fp < 0.0 else 0.0
        chi = min(R, max(0.0, chi - step))
    scale = max(R2 * R, 1.0)
    if abs(_cubic(chi, r, R2, a)) <= 1e-12 * scale and chi < R:
        return chi
    lo, hi = 0.0, R
    if _cubic(lo, r, R2, a) <= 0.0:
        return 0.0
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _cubic(mid, r, R2, a) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECTION_TOL * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


@numba.njit(cache=True)
def _prox_scale(r, R2, a):
    chi = _chi_scalar(r, R2, a)
    gap = R2 - chi * chi
    if (r - chi) > 1e-3 * r and gap < 0.5 * R2:
        gap = a * chi / (r - chi)
    return gap / (gap + a)


# -- dot products ------------------------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _lowbit_index(word):
    low = word & (~word + np.uint64(1))
    return low, np.int64(popcount64(low - np.uint64(1)))


@numba.njit(cache=True, inline="always")
def _dot_bits(sign_w, mask_w, use_mask, o, x, total):
    """``sum_j level_oj x_j`` from packed planes; ``total = sum_j x_j``."""
    acc = 0.0
    nw = sign_w.shape[1]
    if use_mask:
        neg = 0.0
        for k in range(nw):
            base = k * 64
            pos_w = sign_w[o, k] & mask_w[o, k]
            neg_w = ~sign_w[o, k] & mask_w[o, k]
            while pos_w:
                low, b = _lowbit_index(pos_w)
                acc += x[base + b]
                pos_w ^= low
            while neg_w:
                low, b = _lowbit_index(neg_w)
                neg += x[base + b]
                neg_w ^= low
        return acc - neg
    for k in range(nw):
        base = k * 64
        pos_w = sign_w[o, k]
        while pos_w:
            low, b = _lowbit_index(pos_w)
            acc += x[base + b]
            pos_w ^= low
    return 2.0 * acc - total


@numba.njit(cache=True, inline="always")
def _dot_float(wf, o, x):
    acc = 0.0
    for j in range(x.size):
        acc += wf[o, j] * x[j]
    return acc


@numba.njit(cache=True)
def _dense(kind, wf, sign_w, mask_w, use_mask, beta, x, total):
    """Single-output dense layer (no bias)."""
    if kind == FLOAT:
        return _dot_float(wf, 0, x)
    return beta * _dot_bits(sign_w, mask_w, use_mask, 0, x, total)


# -- layers --------------------------------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _gather(x, i, j, patch):
    """Zero-padded 3x3 patch of every channel at (i, j)."""
    C, H, W = x.shape
    for c in range(C):
        for p in range(3):
            y = i + p - 1
            for q in range(3):
                z = j + q - 1
                patch[c * 9 + p * 3 + q] = x[c, y, z] if 0 <= y < H and 0 <= z < W else 0.0


@numba.njit(cache=True)
def _conv_float(x, wf, out):
    C, H, W = x.shape
    patch = np.zeros(C * 9)
    for i in range(H):
        for j in range(W):
            _gather(x, i, j, patch)
            for o in range(out.shape[0]):
                out[o, i, j] = _dot_float(wf, o, patch)


@numba.njit(cache=True)
def _row_tables(x, table):
    """Row tables of ``x`` (C, H, W) in the flat array ``table``.

    Entry ``((c H + y) W + j) 8 + m`` is the sum of ``x[c, y, j-1+q]`` over
    the set bits ``q`` of ``m``; columns outside the input count as zero.
    """
    C, H, W = x.shape
    for c in range(C):
        for y in range(H):
            for j in range(W):
                u = x[c, y, j - 1] if j > 0 else 0.0
                v = x[c, y, j]
                z = x[c, y, j + 1] if j + 1 < W else 0.0
                base = ((c * H + y) * W + j) * 8
                table[base] = 0.0
                table[base + 1] = u
                table[base + 2] = v
                table[base + 3] = u + v
                table[base + 4] = z
                table[base + 5] = u + z
                table[base + 6] = v + z
                table[base + 7] = u + v + z


@numba.njit(cache=True)
def _conv_table(table, C, pos, neg, use_mask, beta, out, offs):
    """3x3 conv of a C-channel input from its row tables (see ``_row_tables``).

    ``pos[o, 3 c + p]`` is the 3-bit code of the positive weights in kernel
    row ``p`` of channel ``c`` (``neg`` likewise for ternary weights).  The
    last eight entries of ``table`` are zero and stand in for kernel rows in
    the padding.  ``offs`` is uint64 scratch space of length >= 3 C
    (unsigned, so that lookups need no negative-index handling).
    """
    O, H, W = out.shape
    zero = np.uint64(table.size - 8)
    T = 3 * C
    for i in range(H):
        for j in range(W):
            for c in range(C):
                for p in range(3):
                    y = i + p - 1
                    offs[3 * c + p] = np.uint64(((c * H + y) * W + j) * 8) if 0 <= y < H else zero
            if use_mask:
                for o in range(O):
                    acc = 0.0
                    for t in range(T):
                        acc += table[offs[t] + pos[o, t]] - table[offs[t] + neg[o, t]]
                    out[o, i, j] = beta * acc
            else:
                total = 0.0
                for t in range(T):
                    total += table[offs[t] + 7]
                for o in range(O):
                    acc = 0.0
                    for t in range(T):
                        acc += table[offs[t] + pos[o, t]]
                    out[o, i, j] = beta * (2.0 * acc - total)


@numba.njit(cache=True)
def _conv_xnor(xbits, C, tap_sign, tap_mask, use_mask, beta, out):
    """3x3 conv of a +-1 input with channel-packed words ``xbits`` (H, W).

    Padding taps are skipped; each valid tap adds
    ``2 popcount(xnor & keep) - popcount(keep)``.
    """
    H, W = xbits.shape
    O = out.shape[0]
    cmask = (np.uint64(1) << np.uint64(C)) - np.uint64(1) if C < 64 else ~np.uint64(0)
    words = np.zeros(9, dtype=np.uint64)
    taps = np.zeros(9, dtype=np.int64)
    for i in range(H):
        for j in range(W):
            nt = 0
            for p in range(3):
                y = i + p - 1
                for q in range(3):
                    z = j + q - 1
                    if 0 <= y < H and 0 <= z < W:
                        words[nt] = xbits[y, z]
                        taps[nt] = p * 3 + q
                        nt += 1
            for o in range(O):
                acc = 0
                if use_mask:
                    for k in range(nt):
                        keep = tap_mask[o, taps[k]]
                        agree = ~(tap_sign[o, taps[k]] ^ words[k]) & keep
                        acc += 2 * np.int64(popcount64(agree)) - np.int64(popcount64(keep))
                else:
                    for k in range(nt):
                        agree = ~(tap_sign[o, taps[k]] ^ words[k]) & cmask
                        acc += np.int64(popcount64(agree))
                    acc = 2 * acc - nt * C
                out[o, i, j] = beta * acc


@numba.njit(cache=True)
def _pack_signs(x, out):
    C, H, W = x.shape
    for i in range(H):
        for j in range(W):
            word = np.uint64(0)
            for c in range(C):
                if x[c, i, j] >= 0.0:
                    word |= np.uint64(1) << np.uint64(c)
            out[i, j] = word


@intrinsic
def _as_double(typingctx, bits):
    """Reinterpret an int64 bit pattern as a float64."""
    if bits != types.int64:
        return None

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], context.get_value_type(types.float64))

    return types.float64(types.int64), codegen


_LOG2E = 1.4426950408889634
_LN2_HI = 0.6931471803691238
_LN2_LO = 1.9082149292705877e-10


@numba.njit(cache=True, inline="always")
def _softplus(x):
    """``max(x, 0) + log1p(exp(-|x|))`` without libm calls, so that loops over
    it vectorize; accurate to a few ulps.

    ``exp(-a) = 2^-k exp(r)`` with ``|r| <= ln 2 / 2`` (degree-13 Taylor
    polynomial), then ``log1p(t) = 2 atanh(t / (2 + t))`` by its odd series.
    """
    a = min(abs(x), 1000.0)
    k = np.int64(a * _LOG2E + 0.5)
    r = k * _LN2_HI - a + k * _LN2_LO
    p = 1.0 / 6227020800.0
    p = p * r + 1.0 / 479001600.0
    p = p * r + 1.0 / 39916800.0
    p = p * r + 1.0 / 3628800.0
    p = p * r + 1.0 / 362880.0
    p = p * r + 1.0 / 40320.0
    p = p * r + 1.0 / 5040.0
    p = p * r + 1.0 / 720.0
    p = p * r + 1.0 / 120.0
    p = p * r + 1.0 / 24.0
    p = p * r + 1.0 / 6.0
    p = p * r + 0.5
    p = p * r + 1.0
    p = p * r + 1.0
    # 2^-k as two normal factors (k reaches 1443)
    h = k >> 1
    t = p * _as_double((1023 - h) << 52) * _as_double((1023 - (k - h)) << 52)
    u = t / (2.0 + t)
    u2 = u * u
    q = 1.0 / 35.0
    for d in range(33, 0, -2):
        q = q * u2 + 1.0 / d
    return max(x, 0.0) + 2.0 * u * q


@numba.njit(cache=True, error_model="numpy")
def _softplus_add(x, bias, out, need_total):
    """``out = softplus(x + bias)`` elementwise; returns the sum of ``out``
    when ``need_total`` is set (zero otherwise)."""
    for i in range(x.size):
        out[i] = _softplus(x[i] + bias[i])
    total = 0.0
    if need_total:
        for i in range(out.size):
            total += out[i]
    return total


@numba.njit(cache=True)
def _affine_act(y, scale, shift, act, slope):
    """``y <- act(scale * y + shift)`` per channel; act 0 none, 1 PReLU, 2 sign."""
    C, H, W = y.shape
    for c in range(C):
        for i in range(H):
            for j in range(W):
                v = scale[c] * y[c, i, j] + shift[c]
                if act == 1 and v < 0.0:
                    v = slope * v
                elif act == 2:
                    v = 1.0 if v >= 0.0 else -1.0
                y[c, i, j] = v


@numba.njit(cache=True)
def _ppu_layer(x, table, offs, xbits, kind, wf, pos, neg, tap_sign, tap_mask, use_mask, beta, out):
    C = x.shape[0]
    if kind == XNOR:
        _pack_signs(x, xbits)
        _conv_xnor(xbits, C, tap_sign, tap_mask, use_mask, beta, out)
    elif kind == FLOAT:
        _conv_float(x, wf, out)
    else:
        _row_tables(x, table)
        _conv_table(table, C, pos, neg, use_mask, beta, out, offs)


# -- full network -------------------------------------------------------------------------------


@numba.njit(cache=True)
def _run(psi, root, R2, thr, A, e, rms,
         gammas, lams, sub_kind, sub_wf, sub_pos, sub_neg, sub_beta, sub_bias,
         fc_wf, fc_sign, fc_mask, fc_beta, fc_bias, use_mask,
         p_kind, p_wf, p_pos, p_neg, p_tsign, p_tmask, p_beta, p_scale, p_shift, p_act, p_slope,
         c1, c2, out_w, out_mult):
    S, K, n = psi.shape
    M = n // 2
    B = gammas.size
    NS = sub_bias.shape[1] // (n * K)
    need_total = sub_kind == BITS and not use_mask
    X0 = np.zeros((1, n, K))
    X = np.zeros((2, n, K))
    h_sub = np.zeros((NS, n, K))
    h1 = np.zeros((c1, n, K))
    h2 = np.zeros((c2, n, K))
    h3 = np.zeros((1, n, K))
    table = np.zeros((max(2, c1, c2) * n * K + 1) * 8)
    offs = np.zeros(3 * max(2, c1, c2), dtype=np.uint64)
    xbits = np.zeros((n, K), dtype=np.uint64)
    flat = np.zeros(NS * n * K)
    w = np.zeros(n)
    z = np.zeros(n)
    for s in range(S):
        for m in range(n):
            for k in range(K):
                X0[0, m, k] = psi[s, k, m] / rms[s]
        if sub_kind != FLOAT:
            # shared by both subnetworks and the first post-processing layer
            _row_tables(X0, table)
        # initial precoder
        den = 0.0
        for k in range(K):
            for m in range(n):
                den += psi[s, k, m] ** 2
        for m in range(n):
            acc = 0.0
            for k in range(K):
                acc += psi[s, k, m]
            w[m] = root[s] * acc / den if den > 0 else 0.0
        ups = 0.0
        for l in range(B):
            if sub_kind == FLOAT:
                _conv_float(X0, sub_wf[l], h_sub)
            else:
                _conv_table(table, 1, sub_pos[l], sub_neg[l], use_mask, sub_beta[l], h_sub, offs)
            total = _softplus_add(h_sub.reshape(h_sub.size), sub_bias[l], flat, need_total)
            pre = _dense(sub_kind, fc_wf[l], fc_sign[l], fc_mask[l], use_mask, fc_beta[l],
                         flat, total) + fc_bias[l]
            ups = _softplus(pre)
            g = gammas[l]
            a = 2.0 * g * ups
            for m in range(n):
                z[m] = (1.0 - 2.0 * g) * w[m] - g * lams[l]
            for _ in range(K):
                r2 = 0.0
                for m in range(n):
                    r2 += z[m] * z[m]
                sc = _prox_scale(np.sqrt(r2), R2[s], a)
                for m in range(n):
                    z[m] *= sc
            w[:] = z
        scale_w = rms[s] / root[s]
        for m in range(n):
            for k in range(K):
                X[0, m, k] = X0[0, m, k]
                X[1, m, k] = w[m] * scale_w
        if p_kind[0] == BITS:
            _row_tables(X[1:], table[n * K * 8:])
            _conv_table(table, 2, p_pos[0], p_neg[0], use_mask, p_beta[0], h1, offs)
        else:
            _ppu_layer(X, table, offs, xbits, p_kind[0], p_wf[0], p_pos[0], p_neg[0], p_tsign[0],
                       p_tmask[0], use_mask, p_beta[0], h1)
        _affine_act(h1, p_scale[0], p_shift[0], p_act, p_slope[0])
        _ppu_layer(h1, table, offs, xbits, p_kind[1], p_wf[1], p_pos[1], p_neg[1], p_tsign[1],
                   p_tmask[1], use_mask, p_beta[1], h2)
        _affine_act(h2, p_scale[1], p_shift[1], p_act, p_slope[1])
        _ppu_layer(h2, table, offs, xbits, p_kind[2], p_wf[2], p_pos[2], p_neg[2], p_tsign[2],
                   p_tmask[2], use_mask, p_beta[2], h3)
        # multiplier shares, then the closed-form precoder
        kappa = 1.0 + ups
        ssum = 0.0
        for k in range(K):
            for half in range(2):
                acc = 0.0
                for m in range(M):
                    acc += _softplus(h3[0, half * M + m, k] + p_shift[2][0])
                pi = acc / M
                out_mult[s, k, half] = pi
                ssum += pi * e[s, k, half]
        f = thr[s] * kappa / ((kappa - 1.0) * ssum)
        for m in range(n):
            acc = 0.0
            for k in range(K):
                for half in range(2):
                    acc += out_mult[s, k, half] * A[s, k, half, m]
            out_w[s, m] = -f * acc
        for k in range(K):
            for half in range(2):
                out_mult[s, k, half] *= kappa / ssum


# -- lowering ---------------------------------------------------------------------------------------


def _row_codes(q):
    """3-bit codes of the positive and negative weights per (output, 3 c + kernel row)."""
    levels = q.levels().reshape(q.shape[0], -1, 3)
    bits = np.array([1, 2, 4], dtype=np.uint8)
    pos = ((levels > 0) * bits).sum(axis=2).astype(np.uint8)
    neg = ((levels < 0) * bits).sum(axis=2).astype(np.uint8)
    return pos, neg


def _tap_words(q, C):
    """Channel-packed words per (output, tap): bit c of word [o, t] is channel c."""
    levels = q.levels().reshape(q.shape[0], C, 9)
    sign = levels.transpose(0, 2, 1) >= 0
    mask = levels.transpose(0, 2, 1) != 0
    pad = np.zeros(sign.shape[:2] + (64 - C,), dtype=bool)

    def words(bits):
        packed = pack_rows(np.concatenate([bits, pad], axis=2).reshape(-1, 64))
        return to_words(packed).reshape(sign.shape[0], 9)

    return words(sign | ~mask), words(mask)


@dataclass
class CompiledModel:
    """Flat arrays of a model ready for the compiled kernel."""

    precision: str
    arrays: tuple

    def run(self, batch):
        """Precoders (S, 2M) and multipliers (S, K, 2) for a SlotBatch."""
        psi = np.ascontiguousarray(batch.psi)
        S, K, n = psi.shape
        rms = np.sqrt(np.mean(psi**2, axis=(1, 2)))
        rms = np.where(rms > 0, rms, 1.0)
        R2 = 2.0 * batch.gamma * batch.n0 * batch.tan_phi**2
        sq = np.sum(batch.vectors**2, axis=-1)
        e = np.maximum(sq - (batch.delta_eff**2)[:, None, None], 1e-12 * sq)
        out_w = np.zeros((S, n))
        out_mult = np.zeros((S, K, 2))
        _run(psi, batch.root_gamma, R2, batch.threshold, np.ascontiguousarray(batch.vectors), e, rms,
             *self.arrays, out_w, out_mult)
        return out_w, out_mult


def compile_model(model):
    """Lower a model (evaluation mode, folded batch norm) to a CompiledModel."""
    prec = model.precision
    quant = prec != "fp32"
    kind = BITS if quant else FLOAT
    B = len(model.blocks)
    gammas = np.array([blk.gamma for blk in model.blocks])
    lams = np.array([float(blk.lam.values[0]) for blk in model.blocks])

    def lower(weight, table):
        """(float weights, positive codes or sign words, negative codes or mask words, beta)."""
        values = weight.values.astype(float)
        if not quant:
            empty = _EMPTY_C if table else _EMPTY_U
            return values.reshape(values.shape[0], -1), empty, empty, 1.0
        q = quantize(values, prec)
        if table:
            return (_EMPTY_W, *_row_codes(q), q.beta)
        sign = to_words(q.sign)
        mask = to_words(q.mask) if q.mask is not None else sign
        return _EMPTY_W, sign, mask, q.beta

    sub = [lower(blk.conv.weight, True) for blk in model.blocks]
    fc = [lower(blk.fc.weight, False) for blk in model.blocks]
    sub_wf = np.stack([s[0] for s in sub])
    sub_pos = np.stack([s[1] for s in sub])
    sub_neg = np.stack([s[2] for s in sub])
    sub_beta = np.array([s[3] for s in sub])
    # per-channel biases repeated over the (2M, K) positions of each channel
    sub_bias = np.stack([np.repeat(blk.conv.bias.values, 2 * model.M * model.K) for blk in model.blocks])
    fc_wf = np.stack([f[0] for f in fc])
    fc_sign = np.stack([f[1] for f in fc])
    fc_mask = np.stack([f[2] for f in fc])
    fc_beta = np.array([f[3] for f in fc])
    fc_bias = np.array([float(blk.fc.bias.values[0]) for blk in model.blocks])

    layers = model.ppu.layers
    convs = [layers[0], layers[3], layers[6]]
    bns = [layers[1], layers[4]]
    acts = [layers[2], layers[5]]
    p_kind, p_wf, p_pos, p_neg, p_tsign, p_tmask, p_beta = [], [], [], [], [], [], []
    for k, conv in enumerate(convs):
        xnor_input = quant and model.sign_activations and k > 0
        wf, pos, neg, beta = lower(conv.weight, True)
        tsign = tmask = _EMPTY_U
        if xnor_input:
            q = quantize(conv.weight.values, prec)
            tsign, tmask = _tap_words(q, conv.weight.values.shape[1])
        p_kind.append(XNOR if xnor_input else kind)
        p_wf.append(wf)
        p_pos.append(pos)
        p_neg.append(neg)
        p_tsign.append(tsign)
        p_tmask.append(tmask)
        p_beta.append(beta)
    p_scale, p_shift = [], []
    for conv, bn in zip(convs, bns):
        a, c = bn.folded()
        p_scale.append(a)
        p_shift.append(a * conv.bias.values + c)
    p_scale.append(np.ones(1))
    p_shift.append(convs[2].bias.values.astype(float))
    if isinstance(acts[0], PReLU):
        p_act, p_slope = 1, (float(acts[0].slope.values[0]), float(acts[1].slope.values[0]))
    else:
        p_act, p_slope = 2, (0.0, 0.0)
    arrays = (
        gammas, lams, kind, sub_wf, sub_pos, sub_neg, sub_beta, sub_bias,
        fc_wf, fc_sign, fc_mask, fc_beta, fc_bias, prec == "ternary",
        tuple(p_kind), tuple(p_wf), tuple(p_pos), tuple(p_neg), tuple(p_tsign), tuple(p_tmask),
        np.array(p_beta), tuple(p_scale), tuple(p_shift), p_act, p_slope,
        bns[0].scale.values.size, bns[1].scale.values.size,
    )
    return CompiledModel(prec, arrays)


# -- benchmark ---------------------------------------------------------------------------------------


@dataclass
class TimingRow:
    method: str
    median_us: float
    mean_us: float
    runs: int
    samples: int


def benchmark_inference(models, batch, warmup=10, runs=15):
    """Per-sample latency of each model's compiled forward pass.

    ``models`` maps a label to a model.  Runs are interleaved across models
    so that slow drifts of the machine affect every model alike; each run
    times the whole batch and divides by its size.
    """
    if warmup < 10:
        raise ValueError("warmup must be >= 10 runs")
    compiled = {name: compile_model(m) for name, m in models.items()}
    for _ in range(warmup):
        for cm in compiled.values():
            cm.run(batch)
    times = {name: [] for name in compiled}
    for _ in range(runs):
        for name, cm in compiled.items():
            t0 = time.perf_counter()
            cm.run(batch)
            times[name].append((time.perf_counter() - t0) / len(batch) * 1e6)
    return [
        TimingRow(name, float(np.median(t)), float(np.mean(t)), runs, len(batch))
        for name, t in times.items()
    ]
