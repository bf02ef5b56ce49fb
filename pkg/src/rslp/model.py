"""Unfolded robust SLP network: PUU prox blocks, PPU conv stack, losses and training.

Data flow for a batch of slots:

* features ``X0 = Psi / rms`` arranged as (S, 1, 2M, K), one column per user;
* the parameter update unit (PUU) runs ``B_r`` unfolded proximal steps
  ``w <- prox_{gamma upsilon B}((1 - 2 gamma) w - gamma lam)`` (once per user),
  with ``upsilon`` emitted by a small conv subnet from ``X0``;
* the post-processing unit (PPU) maps ``[X0, w feature]`` to one multiplier
  pair per user;
* the precoder is recovered in closed form from the multipliers.

Multipliers are parametrized as ``upsilon_ij = kappa pi_ij / sum pi e`` with
``kappa = 1 + upsilon_last`` and ``e_ij = ||a_ij||^2 - delta'^2``, which keeps
the closed form ``w = c sum(ups a) / (1 - sum(ups e))`` free of poles.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from rslp.barrier import prox_scale_grads
from rslp.errors import DimensionError, ParameterError, TrainingDivergedError
from rslp.geometry import QPSK_HALF_ANGLE, SlotBatch, check_phi
from rslp.nn import (
    AdamState,
    AvgPool2d,
    BatchNorm2d,
    Conv2d,
    Flatten,
    LayerParam,
    Linear,
    PReLU,
    Sequential,
    Sign,
    Softplus,
    adam_step,
    softplus,
    softplus_grad,
    softplus_inverse,
)
from rslp.quant import PRECISIONS

SUBNET_CHANNELS = 20
PPU_CHANNELS = (16, 8)
INIT_STEP = 0.01
RIDGE = 1e-10
MIN_EXCESS = 1e-12
PPU_INPUT = "features+precoder"
PPU_OUTPUT_MAP = "plane[m, i] -> flat[i * 2M + m]; user i takes flat[i*2M:(i+1)*2M], halves give (ups1, ups2)"


@dataclass(frozen=True)
class TrainConfig:
    """Training schedule and loss settings.

    ``puu_iters`` and ``ppu_iters`` count epochs over the dataset; the
    learning rate restarts at ``lr0`` for every stage and is multiplied by
    ``lr_decay`` after each epoch.  ``penalty`` and ``margin_offset`` shape
    the constraint penalty of the training loss.
    """

    puu_iters: int = 15
    ppu_iters: int = 10
    blocks: int = 2
    batch: int = 200
    lr0: float = 1e-3
    lr_decay: float = 0.65
    mu: float = 1e-4
    snr_db: tuple = (0.0, 45.0)
    delta_sq: float = 1e-4
    samples: int = 2000
    seed: int = 0
    penalty: float = 100.0
    margin_offset: float = 0.05
    phi: float = QPSK_HALF_ANGLE
    n0: float = 1.0

    def __post_init__(self):
        if self.puu_iters < 0 or self.ppu_iters < 0:
            raise ParameterError("iteration counts must be >= 0")
        if self.blocks < 1 or self.batch < 1 or self.samples < 1:
            raise ParameterError("blocks, batch and samples must be >= 1")
        if not (self.lr0 > 0 and 0 < self.lr_decay < 1):
            raise ParameterError("need lr0 > 0 and lr_decay in (0, 1)")
        if self.mu < 0 or self.delta_sq < 0 or self.penalty < 0 or self.margin_offset < 0:
            raise ParameterError("mu, delta_sq, penalty and margin_offset must be >= 0")
        lo, hi = self.snr_db
        if lo > hi:
            raise ParameterError("snr_db must be (low, high)")


class PuuBlock:
    """One unfolded prox step with learnable ``gamma`` (softplus), ``lam`` and
    a barrier subnet producing ``upsilon``."""

    def __init__(self, M, K, precision, rng, name):
        self.name = name
        self.gamma_raw = LayerParam(f"{name}.gamma", [softplus_inverse(INIT_STEP)], "scalar")
        self.lam = LayerParam(f"{name}.lam", [0.0], "scalar")
        self.conv = Conv2d(1, SUBNET_CHANNELS, precision=precision, rng=rng, name=f"{name}.conv")
        self.fc = Linear(SUBNET_CHANNELS * 2 * M * K, 1, precision=precision, rng=rng, name=f"{name}.fc")
        self.fc.bias.values[:] = rng.uniform(0.0, 1.0, 1)
        self.subnet = Sequential([self.conv, AvgPool2d(), Softplus(), Flatten(), self.fc, Softplus()])

    @property
    def gamma(self):
        return float(softplus(self.gamma_raw.values[0]))

    def params(self):
        return [self.gamma_raw, self.lam] + self.subnet.params()


def _build_ppu(precision, sign_activations, rng):
    c1, c2 = PPU_CHANNELS

    def act(name):
        return Sign() if sign_activations else PReLU(name=name)

    conv1 = Conv2d(2, c1, precision=precision, rng=rng, name="ppu.conv1")
    conv2 = Conv2d(c1, c2, precision=precision, rng=rng, name="ppu.conv2")
    conv3 = Conv2d(c2, 1, precision=precision, rng=rng, name="ppu.conv3")
    conv3.bias.values[:] = rng.uniform(0.0, 1.0, 1)
    return Sequential([
        conv1, BatchNorm2d(c1, name="ppu.bn1"), act("ppu.act1"),
        conv2, BatchNorm2d(c2, name="ppu.bn2"), act("ppu.act2"),
        conv3,
    ])


@dataclass
class ForwardResult:
    """Outputs of a forward pass; ``multipliers`` has shape (S, K, 2)."""

    w: np.ndarray
    multipliers: np.ndarray
    pi: np.ndarray
    kappa: np.ndarray
    upsilons: list
    w_puu: np.ndarray


class UnfoldedModel:
    """PUU blocks, PPU conv stack and the closed-form precoder recovery.

    Quantized models keep latent float weights; every forward pass uses
    their quantized values.  ``sign_activations`` replaces the PPU PReLUs
    by sign functions (default: on for quantized precisions).
    """

    def __init__(self, M, K, blocks=2, precision="fp32", phi=QPSK_HALF_ANGLE, n0=1.0,
                 sign_activations=None, seed=0):
        if M < 1 or K < 1:
            raise DimensionError("M and K must be >= 1")
        if blocks < 1:
            raise ParameterError("the PUU needs at least one block")
        if precision not in PRECISIONS:
            raise ParameterError(f"unknown precision {precision!r}")
        check_phi(phi)
        if sign_activations is None:
            sign_activations = precision != "fp32"
        self.M, self.K = int(M), int(K)
        self.precision = precision
        self.phi, self.n0 = float(phi), float(n0)
        self.sign_activations = bool(sign_activations)
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.blocks = [PuuBlock(self.M, self.K, precision, rng, f"puu{l}") for l in range(blocks)]
        self.ppu = _build_ppu(precision, self.sign_activations, rng)
        self._cache = None

    # -- bookkeeping -----------------------------------------------------------

    def config(self):
        return {
            "M": self.M, "K": self.K, "blocks": len(self.blocks), "precision": self.precision,
            "phi": self.phi, "n0": self.n0, "sign_activations": self.sign_activations,
            "seed": self.seed, "ppu_input": PPU_INPUT, "ppu_output_map": PPU_OUTPUT_MAP,
        }

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg["M"], cfg["K"], cfg["blocks"], cfg["precision"], cfg["phi"], cfg["n0"],
                   cfg["sign_activations"], cfg.get("seed", 0))

    def params(self):
        return [p for blk in self.blocks for p in blk.params()] + self.ppu.params()

    def named_params(self):
        return {p.name: p for p in self.params()}

    def parameter_count(self):
        """Number of trainable scalars."""
        return sum(p.values.size for p in self.params() if p.trainable)

    def weight_params(self):
        return [p for p in self.params() if p.role == "weight"]

    def inventory(self):
        """Values stored for inference as ``(name, count, precision)``.

        Batch norm is folded into one scale and one shift per channel, with
        the preceding conv bias merged into the shift.
        """
        items = []
        for blk in self.blocks:
            items += [(blk.gamma_raw.name, 1, "fp32"), (blk.lam.name, 1, "fp32")]
            for layer in (blk.conv, blk.fc):
                items.append((layer.weight.name, layer.weight.values.size, layer.weight.precision))
                items.append((layer.bias.name, layer.bias.values.size, "fp32"))
        layers = self.ppu.layers
        for k in range(0, 6, 3):
            conv, bn, act = layers[k:k + 3]
            items.append((conv.weight.name, conv.weight.values.size, conv.weight.precision))
            n = bn.scale.values.size
            items += [(f"{bn.scale.name}.folded", n, "fp32"), (f"{bn.shift.name}.folded", n, "fp32")]
            items += [(p.name, p.values.size, "fp32") for p in act.params()]
        conv3 = layers[6]
        items.append((conv3.weight.name, conv3.weight.values.size, conv3.weight.precision))
        items.append((conv3.bias.name, conv3.bias.values.size, "fp32"))
        return items

    # -- forward ------------------------------------------------------------------

    def _check(self, batch):
        if batch.K != self.K or batch.M != self.M:
            raise DimensionError(f"model is M={self.M}, K={self.K}; batch is M={batch.M}, K={batch.K}")

    @staticmethod
    def features(batch):
        """Scaled channel features (S, 1, 2M, K) and the per-slot RMS."""
        rms = np.sqrt(np.mean(batch.psi**2, axis=(1, 2)))
        rms = np.where(rms > 0, rms, 1.0)
        return (batch.psi / rms[:, None, None]).transpose(0, 2, 1)[:, None], rms

    @staticmethod
    def initial_precoder(batch):
        """``sqrt(Gamma n0) sum_i Psi_i / sum_i ||Psi_i||^2``."""
        num = batch.psi.sum(axis=1)
        den = np.sum(batch.psi**2, axis=(1, 2))
        return batch.root_gamma[:, None] * num / np.where(den > 0, den, 1.0)[:, None]

    def barrier_subnet_forward(self, X0, block=0, train=False):
        """``upsilon`` of one block, shape (S,)."""
        self._check_features(X0)
        return self.blocks[block].subnet.forward(X0, train)[:, 0]

    def _check_features(self, X, channels=1):
        want = (channels, 2 * self.M, self.K)
        if X.ndim != 4 or X.shape[1:] != want:
            raise DimensionError(f"expected features of shape (B, {', '.join(map(str, want))}), got {X.shape}")

    def ppu_forward(self, X, train=False):
        """Per-user multiplier shares ``pi`` (S, K, 2) from the PPU input (S, 2, 2M, K)."""
        self._check_features(X, channels=2)
        out = self.ppu.forward(X, train)
        o = self._user_major(out)
        self._ppu_raw = o
        return softplus(o).mean(axis=-1)

    def _user_major(self, out):
        S = out.shape[0]
        return out[:, 0].transpose(0, 2, 1).reshape(S, self.K, 2, self.M)

    def _puu(self, batch, X0, train):
        R2 = 2.0 * batch.gamma * batch.n0 * batch.tan_phi**2
        w = self.initial_precoder(batch)
        caches, upsilons = [], []
        for blk in self.blocks:
            ups = blk.subnet.forward(X0, train)[:, 0]
            g, lam = blk.gamma, float(blk.lam.values[0])
            w_in = w
            z = (1.0 - 2.0 * g) * w - g * lam
            a = 2.0 * g * ups
            steps = []
            for _ in range(self.K):
                r = np.linalg.norm(z, axis=1)
                s, ds_dr, ds_da = prox_scale_grads(r, R2, a)
                steps.append((z, r, s, ds_dr, ds_da))
                z = s[:, None] * z
            caches.append((w_in, ups, g, lam, steps))
            upsilons.append(ups)
            w = z
        return w, caches, upsilons

    def forward(self, batch, train=False):
        self._check(batch)
        X0, rms = self.features(batch)
        w_puu, puu_cache, upsilons = self._puu(batch, X0, train)
        scale = rms / batch.root_gamma
        wfeat = np.repeat((w_puu * scale[:, None])[:, None, :, None], self.K, axis=3)
        pi = self.ppu_forward(np.concatenate([X0, wfeat], axis=1), train)
        kappa = 1.0 + upsilons[-1]
        A = batch.vectors
        e = _excess(batch)
        s = np.einsum("skj,skj->s", pi, e)
        D = np.einsum("skj,skjn->sn", pi, A)
        f = batch.threshold * kappa / ((kappa - 1.0) * s)
        w = -f[:, None] * D
        self._cache = (batch, rms, scale, puu_cache, pi, kappa, e, s, D, f, self._ppu_raw)
        mult = kappa[:, None, None] * pi / s[:, None, None]
        return ForwardResult(w, mult, pi, kappa, upsilons, w_puu)

    # -- backward ----------------------------------------------------------------------

    def backward(self, grad_w):
        """Accumulate parameter gradients of a scalar loss from ``dL/dw`` (S, 2M)."""
        batch, rms, scale, puu_cache, pi, kappa, e, s, D, f, raw = self._cache
        A = batch.vectors
        c = batch.threshold
        ups_last = kappa - 1.0
        g_f = -np.einsum("sn,sn->s", grad_w, D)
        g_D = -f[:, None] * grad_w
        g_s = -g_f * f / s
        g_kappa = -g_f * c / (ups_last**2 * s)
        g_pi = np.einsum("sn,skjn->skj", g_D, A) + g_s[:, None, None] * e
        g_raw = np.repeat((g_pi / self.M)[..., None], self.M, axis=-1) * softplus_grad(raw)
        S = g_raw.shape[0]
        g_out = g_raw.reshape(S, self.K, 2 * self.M).transpose(0, 2, 1)[:, None]
        g_X = self.ppu.backward(g_out)
        g_w = g_X[:, 1].sum(axis=2) * scale[:, None]
        for idx in reversed(range(len(self.blocks))):
            blk = self.blocks[idx]
            w_in, ups, g, lam, steps = puu_cache[idx]
            g_a = np.zeros(S)
            for z, r, sc, ds_dr, ds_da in reversed(steps):
                dot = np.einsum("sn,sn->s", z, g_w)
                with np.errstate(invalid="ignore", divide="ignore"):
                    radial = np.where(r > 0, ds_dr * dot / r, 0.0)
                g_a += ds_da * dot
                g_w = sc[:, None] * g_w + radial[:, None] * z
            g_ups = 2.0 * g * g_a
            if idx == len(self.blocks) - 1:
                g_ups = g_ups + g_kappa
            g_gamma = float(np.sum(2.0 * ups * g_a) + np.sum(g_w * (-2.0 * w_in - lam)))
            blk.lam.grad = np.array([-g * float(np.sum(g_w))])
            blk.gamma_raw.grad = np.array([g_gamma * float(softplus_grad(blk.gamma_raw.values[0]))])
            blk.subnet.backward(g_ups[:, None])
            g_w = (1.0 - 2.0 * g) * g_w


def _excess(batch):
    """``e_ij = ||a_ij||^2 - delta'^2``, floored at a tiny positive fraction."""
    sq = np.sum(batch.vectors**2, axis=-1)
    e = sq - (batch.delta_eff**2)[:, None, None]
    return np.maximum(e, MIN_EXCESS * sq)


def build_model(M, K, blocks=2, precision="fp32", phi=QPSK_HALF_ANGLE, n0=1.0,
                sign_activations=None, seed=0):
    return UnfoldedModel(M, K, blocks, precision, phi, n0, sign_activations, seed)


# -- losses and recovery -------------------------------------------------------------


def regularizer(params, mu):
    """``(mu / L) sum ||Omega||^2`` over the ``L`` weight tensors, with gradients."""
    weights = [p for p in params if p.role == "weight"]
    if not weights or mu == 0:
        return 0.0, {}
    k = mu / len(weights)
    value = k * sum(float(np.sum(p.values**2)) for p in weights)
    return value, {p.name: 2.0 * k * p.values for p in weights}


def lagrangian_loss(batch, w2, multipliers, params=(), mu=1e-4, form="exact"):
    """Regularized Lagrangian averaged over slots, and its gradient in ``w2``.

    Per slot: ``||w||^2 + sum_ij ups_ij (delta'^2 ||w||^2 - (c + a_ij'w)^2)``.
    ``form="scalar"`` bounds ``(a'w)^2`` by ``||a||^2 ||w||^2``, which is the
    Lagrangian whose stationary point is the scalar recovery form.
    Returns ``(value, grad_w)`` with ``grad_w`` of shape (S, 2M).
    """
    w2 = np.atleast_2d(np.asarray(w2, dtype=float))
    ups = np.asarray(multipliers, dtype=float).reshape(len(batch), batch.K, 2)
    if np.any(ups < 0):
        raise ParameterError("multipliers must be nonnegative")
    A = batch.vectors
    c = batch.threshold
    d2 = batch.delta_eff**2
    ww = np.einsum("sn,sn->s", w2, w2)
    lin = np.einsum("skjn,sn->skj", A, w2)
    total = ups.sum(axis=(1, 2))
    if form == "exact":
        resid = c[:, None, None] + lin
        terms = d2 * total * ww - np.einsum("skj,skj->s", ups, resid**2)
        grad = (2.0 + 2.0 * d2 * total)[:, None] * w2 - 2.0 * np.einsum("skj,skj,skjn->sn", ups, resid, A)
    elif form == "scalar":
        sq = np.sum(A**2, axis=-1)
        excess = np.einsum("skj,skj->s", ups, sq) - d2 * total
        terms = -excess * ww - np.einsum("skj,skj->s", ups, c[:, None, None]**2 + 2 * c[:, None, None] * lin)
        grad = (2.0 - 2.0 * excess)[:, None] * w2 - 2.0 * c[:, None] * np.einsum("skj,skjn->sn", ups, A)
    else:
        raise ValueError(f"unknown form {form!r}")
    reg, _ = regularizer(params, mu)
    S = len(batch)
    return float(np.mean(ww + terms)) + reg, grad / S


@dataclass
class Recovery:
    """Recovered precoders (S, 2M); ``regularized`` flags slots that needed the ridge."""

    w: np.ndarray
    regularized: np.ndarray = field(default=None)


def recover_precoder(batch, multipliers, form="scalar"):
    """Stationary point in ``w2`` of the Lagrangian for given multipliers.

    ``form="exact"`` solves ``P w = c sum(ups a)`` with
    ``P = (1 + delta'^2 sum ups) I - sum ups a a'``; ``form="scalar"``
    replaces ``P`` by ``1 - sum ups (||a||^2 - delta'^2)``.  A singular
    ``P`` is regularized with a ridge of 1e-10 and flagged.
    """
    ups = np.asarray(multipliers, dtype=float).reshape(len(batch), batch.K, 2)
    if np.any(ups < 0):
        raise ParameterError("multipliers must be nonnegative")
    A = batch.vectors
    c = batch.threshold
    d2 = batch.delta_eff**2
    rhs = c[:, None] * np.einsum("skj,skjn->sn", ups, A)
    if form == "scalar":
        sq = np.sum(A**2, axis=-1)
        den = 1.0 - np.einsum("skj,skj->s", ups, sq - d2[:, None, None])
        flag = np.abs(den) < RIDGE
        den = np.where(flag, den + RIDGE, den)
        w = rhs / den[:, None]
    elif form == "exact":
        n = A.shape[-1]
        P = (1.0 + d2 * ups.sum(axis=(1, 2)))[:, None, None] * np.eye(n)
        P = P - np.einsum("skj,skjm,skjn->smn", ups, A, A)
        flag = np.linalg.cond(P) > 1.0 / np.finfo(float).eps
        P[flag] += RIDGE * np.eye(n)
        w = np.linalg.solve(P, rhs[..., None])[..., 0]
    else:
        raise ValueError(f"unknown form {form!r}")
    if np.any(flag):
        warnings.warn(f"{int(flag.sum())} singular recovery system(s) regularized", RuntimeWarning, stacklevel=2)
    return Recovery(w, flag)


def training_loss(batch, w2, params, cfg):
    """Penalty loss used for training, and its gradient in ``w2``.

    Per slot: ``||w||^2 / (Gamma n0) + penalty * sum relu(g / sqrt(Gamma n0) + offset)^2``
    over the 2K robust margins ``g``; averaged over slots, plus the
    weight regularizer.
    """
    root = batch.root_gamma
    g = batch.margins(w2) / root[:, None, None]
    v = np.maximum(g + cfg.margin_offset, 0.0)
    ww = np.einsum("sn,sn->s", w2, w2)
    per = ww / root**2 + cfg.penalty * np.sum(v * v, axis=(1, 2))
    norm = np.sqrt(ww)
    unit = w2 / np.where(norm > 0, norm, 1.0)[:, None]
    dmargin = batch.vectors + (batch.delta_eff[:, None] * unit)[:, None, None, :]
    grad = 2.0 * w2 / root[:, None] ** 2
    grad = grad + 2.0 * cfg.penalty * np.einsum("skj,skjn->sn", v, dmargin) / root[:, None]
    reg, _ = regularizer(params, cfg.mu)
    S = len(batch)
    return float(np.mean(per)) + reg, grad / S


# -- training ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    model: UnfoldedModel
    trace: list

    def trace_rows(self):
        return list(self.trace)


def _stages(model, cfg):
    stages = [(f"puu{l + 1}", blk.params(), cfg.puu_iters) for l, blk in enumerate(model.blocks)]
    return stages + [("ppu", model.ppu.params(), cfg.ppu_iters)]


def make_training_phases(N, K, seed):
    """Symbol phases used for every pass over a training set of ``N`` slots."""
    from rslp.channel import random_phases

    return random_phases(N, K, np.random.default_rng(seed))


def train(model, channels, cfg=TrainConfig(), phases=None):
    """Block-wise training: each PUU block, then the PPU, with earlier stages frozen.

    ``channels`` is an array (N, K, M) or a ChannelSet.  Each minibatch gets
    its own SINR drawn uniformly in ``cfg.snr_db`` (dB).  Returns the model
    (trained in place) and the trace of ``(iter, stage, loss, lr)`` rows.
    """
    H = getattr(channels, "samples", channels)
    H = np.asarray(H)
    if H.ndim != 3 or len(H) == 0:
        raise DimensionError("need a nonempty channel array of shape (N, K, M)")
    N = len(H)
    if phases is None:
        phases = make_training_phases(N, model.K, cfg.seed + 1)
    rng = np.random.default_rng(cfg.seed)
    delta = np.sqrt(cfg.delta_sq)
    trace = []
    step = 0
    for stage, params, epochs in _stages(model, cfg):
        trainable = [p for p in params if p.trainable]
        names = {p.name for p in trainable}
        opt = AdamState(cfg.lr0)
        ppu_train = stage == "ppu"
        for _ in range(epochs):
            order = rng.permutation(N)
            for start in range(0, N, cfg.batch):
                idx = np.sort(order[start:start + cfg.batch])
                snr = rng.uniform(*cfg.snr_db)
                batch = SlotBatch.from_channels(H[idx], phases[idx], snr, delta, model.phi, model.n0)
                loss = _train_step(model, batch, cfg, names, ppu_train)
                trace.append((step, stage, loss, opt.lr))
                step += 1
                if not np.isfinite(loss) or not all(np.all(np.isfinite(p.grad)) for p in trainable):
                    raise TrainingDivergedError(f"loss became {loss} at iteration {step - 1}", trace)
                adam_step(trainable, opt)
            opt.lr *= cfg.lr_decay
    return TrainResult(model, trace)


def _train_step(model, batch, cfg, names, ppu_train):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = model.forward(batch, train=ppu_train)
        loss, grad_w = training_loss(batch, out.w, model.params(), cfg)
        if not np.isfinite(loss):
            return loss
        model.backward(grad_w)
    _, reg_grads = regularizer(model.params(), cfg.mu)
    for p in model.params():
        if p.name in names and p.name in reg_grads:
            p.grad = p.grad + reg_grads[p.name]
    return loss


# -- inference ----------------------------------------------------------------------------


@dataclass
class InferenceResult:
    w: np.ndarray
    power: np.ndarray
    multipliers: np.ndarray
    max_margin: np.ndarray


def infer(model, batch, backend="numpy"):
    """Evaluation-mode forward pass; ``backend="engine"`` uses the compiled kernels."""
    if backend == "engine":
        from rslp.engine import compile_model

        w, mult = compile_model(model).run(batch)
    elif backend == "numpy":
        out = model.forward(batch, train=False)
        w, mult = out.w, out.multipliers
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return InferenceResult(w, np.einsum("sn,sn->s", w, w), mult, batch.max_margin(w))


def make_batch(H, phases, snr_db, delta_sq, model):
    """SlotBatch for a model's CI settings."""
    return SlotBatch.from_channels(H, phases, snr_db, np.sqrt(delta_sq), model.phi, model.n0)


__all__ = [
    "TrainConfig", "UnfoldedModel", "PuuBlock", "ForwardResult", "Recovery", "TrainResult",
    "InferenceResult", "build_model", "lagrangian_loss", "training_loss", "recover_precoder",
    "regularizer", "train", "infer", "make_batch",
]
