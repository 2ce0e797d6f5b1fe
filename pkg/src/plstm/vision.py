"""A small pLSTM vision model with hand-written gradients.

Architecture: patch embedding, pLSTM blocks, mean of the four corner tokens,
linear head, binary cross-entropy. A block is

    u = rms_norm(x) * gain
    q, k, v, gates = projections of u
    h = sum over the four direction covers of the grid recurrence + direct term
    x + multi_head_rms_norm(h) @ w_out

Gate activations: source, mark and direct use a sigmoid. P-mode blocks build
the critical transition ``gamma * [[a, a], [1 - a, 1 - a]]`` per node with
``gamma = tanh(5 * W x + b)`` and ``a = sigmoid(W' x + b')``, the orientation
biases ``b'`` spread over ``[-2, 2]`` across heads. D-mode blocks use
``tanh(5 * W x + b)`` for ``t_rr``, ``t_dr`` and ``t_dd`` and keep ``t_rd``
at zero, so every cover's line graph is a multitree. The factor 5 scales the
weight term only, not the bias.

Parameters live in a flat ``dict[str, ndarray]``; gradients use the same keys.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels, tensorio
from .errors import DatasetError, NonFiniteLoss, ShapeError
from .grid import DirectionCombo, GridGates

COMBOS = tuple(DirectionCombo)


@dataclass(frozen=True)
class LayerConfig:
    embed_dim: int = 16
    num_heads: int = 2
    key_dim: int = 4
    value_dim: int = 4
    mode: str = "alternating"  # "p", "d" or "alternating"
    source_bias: float = -4.0
    mark_bias: float = -4.0
    direct_bias: float = -6.0
    transition_bias: float = 1.0
    transition_scale: float = 5.0
    orientation_bias_range: tuple[float, float] = (-2.0, 2.0)
    rmsnorm_eps: float = 1e-5
    pooling: str = "corner-patches"
    share_directions: bool = False

    def __post_init__(self):
        if self.embed_dim % self.num_heads:
            raise ShapeError("embed_dim must be divisible by num_heads")
        if self.mode not in ("p", "d", "alternating"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def block_mode(self, index: int) -> str:
        if self.mode == "alternating":
            return "p" if index % 2 == 0 else "d"
        return self.mode


@dataclass(frozen=True)
class ModelConfig:
    layer: LayerConfig = field(default_factory=LayerConfig)
    image_size: int = 16
    patch_size: int = 4
    channels: int = 1
    num_blocks: int = 2
    pos_embedding: bool = False
    init_std: float = 1.0
    gate_init_std: float = 0.1  # gate projections start small so the configured gate biases dominate

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise ShapeError("image_size must be divisible by patch_size")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size


# -- activations ----------------------------------------------------------------------------------


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x):
    return np.logaddexp(0.0, x)


# -- parameters -----------------------------------------------------------------------------------


def _combo_key(cfg: LayerConfig, c: int) -> int:
    return 0 if cfg.share_directions else c


def orientation_biases(num_heads: int, lo: float = -2.0, hi: float = 2.0) -> np.ndarray:
    return np.linspace(lo, hi, num_heads) if num_heads > 1 else np.array([(lo + hi) / 2.0])


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    lc = cfg.layer
    e, h, kd, vd = lc.embed_dim, lc.num_heads, lc.key_dim, lc.value_dim
    w = lambda fan_in, *shape: cfg.init_std * rng.standard_normal((fan_in, *shape)) / math.sqrt(fan_in)
    wg = lambda fan_in, *shape: cfg.gate_init_std * rng.standard_normal((fan_in, *shape)) / math.sqrt(fan_in)
    p = {}
    pin = cfg.patch_size**2 * cfg.channels
    p["pe_w"] = w(pin, e)
    p["pe_b"] = np.zeros(e)
    if cfg.pos_embedding:
        p["pos"] = 0.02 * rng.standard_normal((cfg.grid, cfg.grid, e))
    for b in range(cfg.num_blocks):
        pre = f"b{b}."
        mode = lc.block_mode(b)
        p[pre + "norm_gain"] = np.ones(e)
        p[pre + "wq"] = w(e, h * kd)
        p[pre + "wk"] = w(e, h * kd)
        p[pre + "wv"] = w(e, h * vd)
        for c in sorted({_combo_key(lc, c) for c in range(4)}):
            p[pre + f"src_w{c}"] = wg(e, h * 2)
            p[pre + f"src_b{c}"] = np.full(h * 2, lc.source_bias)
            p[pre + f"mark_w{c}"] = wg(e, h * 2)
            p[pre + f"mark_b{c}"] = np.full(h * 2, lc.mark_bias)
            if mode == "p":
                p[pre + f"gam_w{c}"] = wg(e, h)
                p[pre + f"gam_b{c}"] = np.full(h, lc.transition_bias)
                p[pre + f"ori_w{c}"] = wg(e, h)
                p[pre + f"ori_b{c}"] = orientation_biases(h, *lc.orientation_bias_range)
            else:
                p[pre + f"tr_w{c}"] = wg(e, h * 3)
                p[pre + f"tr_b{c}"] = np.full(h * 3, lc.transition_bias)
        p[pre + "dir_w"] = wg(e, h)
        p[pre + "dir_b"] = np.full(h, lc.direct_bias)
        p[pre + "mh_gain"] = np.ones(h * vd)
        p[pre + "wo"] = w(h * vd, e)
    p["head_w"] = w(e, 1)[:, 0]
    p["head_b"] = np.zeros(())
    return p


# -- building blocks ------------------------------------------------------------------------------


def _rms_forward(x, gain, eps):
    r = np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + eps)
    n = x / r
    return n * gain, (n, r)


def _rms_backward(dy, gain, cache):
    n, r = cache
    dgain = np.sum(dy * n, axis=tuple(range(dy.ndim - 1)))
    dn = dy * gain
    dx = (dn - n * np.mean(dn * n, axis=-1, keepdims=True)) / r
    return dx, dgain


def multi_head_rms_norm(h, eps=1e-5):
    """Normalize every head's value vector (last axis) to unit root-mean-square."""
    r = np.sqrt(np.mean(h * h, axis=-1, keepdims=True) + eps)
    return h / r


def _flip(a, combo: DirectionCombo, xaxis=1, yaxis=2):
    fx, fy = combo.flips
    axes = tuple(ax for ax, f in ((xaxis, fx), (yaxis, fy)) if f)
    return np.flip(a, axis=axes) if axes else a


def _heads_first(a):
    """``(B, X, Y, H, ...)`` -> ``(B*H, X, Y, ...)``."""
    b, x, y, h = a.shape[:4]
    return np.moveaxis(a, 3, 1).reshape(b * h, x, y, *a.shape[4:])


def _heads_last(a, b):
    bh, x, y = a.shape[:3]
    return np.moveaxis(a.reshape(b, bh // b, x, y, *a.shape[3:]), 1, 3)


def _cover_gates(u, params, pre, c, mode, lc: LayerConfig):
    """Activated gates of one direction cover, each ``(B, X, Y, H)``, plus what backward needs."""
    ck = _combo_key(lc, c)
    b, x, y, _ = u.shape
    hh = lc.num_heads
    s = sigmoid(u @ params[pre + f"src_w{ck}"] + params[pre + f"src_b{ck}"]).reshape(b, x, y, hh, 2)
    m = sigmoid(u @ params[pre + f"mark_w{ck}"] + params[pre + f"mark_b{ck}"]).reshape(b, x, y, hh, 2)
    g = {"s_r": s[..., 0], "s_d": s[..., 1], "m_r": m[..., 0], "m_d": m[..., 1]}
    aux = {"s": s, "m": m}
    sc = lc.transition_scale
    if mode == "p":
        gam = np.tanh(sc * (u @ params[pre + f"gam_w{ck}"]) + params[pre + f"gam_b{ck}"])
        alpha = sigmoid(u @ params[pre + f"ori_w{ck}"] + params[pre + f"ori_b{ck}"])
        g["t_rr"] = g["t_dr"] = gam * alpha
        g["t_rd"] = g["t_dd"] = gam * (1.0 - alpha)
        aux.update(gam=gam, alpha=alpha)
    else:
        t = np.tanh(sc * (u @ params[pre + f"tr_w{ck}"]) + params[pre + f"tr_b{ck}"]).reshape(b, x, y, hh, 3)
        g["t_rr"], g["t_dr"], g["t_dd"] = t[..., 0], t[..., 1], t[..., 2]
        g["t_rd"] = np.zeros_like(t[..., 0])
        aux["t"] = t
    return g, aux


_KERNEL_ORDER = ("s_r", "s_d", "t_rr", "t_dr", "t_rd", "t_dd", "m_r", "m_d")


def _block_forward(x, params, pre, mode, lc: LayerConfig, backend=None):
    b, nx, ny, e = x.shape
    hh, kd, vd = lc.num_heads, lc.key_dim, lc.value_dim
    u, norm_cache = _rms_forward(x, params[pre + "norm_gain"], lc.rmsnorm_eps)
    q = (u @ params[pre + "wq"]).reshape(b, nx, ny, hh, kd)
    k = (u @ params[pre + "wk"]).reshape(b, nx, ny, hh, kd)
    v = (u @ params[pre + "wv"]).reshape(b, nx, ny, hh, vd)
    kv = (k[..., :, None] * v[..., None, :]).reshape(b, nx, ny, hh, kd * vd)
    kv_h = _heads_first(kv)
    h = np.zeros((b, nx, ny, hh, vd))
    covers = []
    for c, combo in enumerate(COMBOS):
        g, aux = _cover_gates(u, params, pre, c, mode, lc)
        gk = [np.ascontiguousarray(_flip(_heads_first(g[n]), combo)) for n in _KERNEL_ORDER]
        payload = np.ascontiguousarray(_flip(kv_h, combo))
        out, cell_r, cell_d = kernels.grid_forward(*gk, payload, backend=backend)
        out = _heads_last(_flip(out, combo), b).reshape(b, nx, ny, hh, kd, vd)
        h += np.einsum("bxyhk,bxyhkv->bxyhv", q, out)
        covers.append((g, aux, gk, payload, cell_r, cell_d, out))
    d = sigmoid(u @ params[pre + "dir_w"] + params[pre + "dir_b"])
    qk = np.sum(q * k, axis=-1)
    h += (d * qk)[..., None] * v
    r = np.sqrt(np.mean(h * h, axis=-1, keepdims=True) + lc.rmsnorm_eps)
    nh = h / r
    yv = nh.reshape(b, nx, ny, hh * vd) * params[pre + "mh_gain"]
    out = x + yv @ params[pre + "wo"]
    cache = dict(x=x, u=u, norm_cache=norm_cache, q=q, k=k, v=v, covers=covers, d=d, qk=qk, nh=nh, r=r, yv=yv, mode=mode)
    return out, cache


def _add(grads, key, value):
    if key in grads:
        grads[key] = grads[key] + value
    else:
        grads[key] = value


def _block_backward(dout, params, pre, cache, lc: LayerConfig, grads, backend=None):
    x, u = cache["x"], cache["u"]
    q, k, v, d, qk, nh, r = (cache[n] for n in ("q", "k", "v", "d", "qk", "nh", "r"))
    b, nx, ny, e = x.shape
    hh, kd, vd = lc.num_heads, lc.key_dim, lc.value_dim
    u2 = u.reshape(-1, e)
    dx = dout.copy()
    d2 = dout.reshape(-1, e)
    _add(grads, pre + "wo", cache["yv"].reshape(-1, hh * vd).T @ d2)
    dyv = (d2 @ params[pre + "wo"].T).reshape(b, nx, ny, hh * vd)
    _add(grads, pre + "mh_gain", np.sum(dyv * nh.reshape(b, nx, ny, hh * vd), axis=(0, 1, 2)))
    dnh = (dyv * params[pre + "mh_gain"]).reshape(b, nx, ny, hh, vd)
    dh = (dnh - nh * np.mean(dnh * nh, axis=-1, keepdims=True)) / r
    # direct term h += d * (q . k) * v
    hv = np.sum(dh * v, axis=-1)
    dd = hv * qk
    dqk = d * hv
    dq = dqk[..., None] * k
    dk = dqk[..., None] * q
    dv = (d * qk)[..., None] * dh
    du = np.zeros_like(u2)
    dpre = dd * d * (1.0 - d)
    _add(grads, pre + "dir_w", u2.T @ dpre.reshape(-1, hh))
    _add(grads, pre + "dir_b", dpre.reshape(-1, hh).sum(axis=0))
    du += dpre.reshape(-1, hh) @ params[pre + "dir_w"].T
    sc = lc.transition_scale
    for c, combo in enumerate(COMBOS):
        ck = _combo_key(lc, c)
        g, aux, gk, payload, cell_r, cell_d, out = cache["covers"][c]
        dq += np.einsum("bxyhkv,bxyhv->bxyhk", out, dh)
        gout = (q[..., :, None] * dh[..., None, :]).reshape(b, nx, ny, hh, kd * vd)
        gout = np.ascontiguousarray(_flip(_heads_first(gout), combo))
        res = kernels.grid_backward(*gk, payload, cell_r, cell_d, gout, backend=backend)
        dg = {n: _heads_last(_flip(a, combo), b) for n, a in zip(_KERNEL_ORDER, res[:8])}
        dkv = _heads_last(_flip(res[8], combo), b).reshape(b, nx, ny, hh, kd, vd)
        dk += np.einsum("bxyhkv,bxyhv->bxyhk", dkv, v)
        dv += np.einsum("bxyhkv,bxyhk->bxyhv", dkv, k)
        # sigmoid gates
        for name, pair in (("src", ("s_r", "s_d")), ("mark", ("m_r", "m_d"))):
            act = aux["s" if name == "src" else "m"]
            dpre = np.stack([dg[pair[0]], dg[pair[1]]], axis=-1) * act * (1.0 - act)
            dpre = dpre.reshape(-1, hh * 2)
            _add(grads, pre + f"{name}_w{ck}", u2.T @ dpre)
            _add(grads, pre + f"{name}_b{ck}", dpre.sum(axis=0))
            du += dpre @ params[pre + f"{name}_w{ck}"].T
        if cache["mode"] == "p":
            gam, alpha = aux["gam"], aux["alpha"]
            to_r = dg["t_rr"] + dg["t_dr"]
            to_d = dg["t_rd"] + dg["t_dd"]
            dgam = to_r * alpha + to_d * (1.0 - alpha)
            dalpha = gam * (to_r - to_d)
            dg_pre = (dgam * (1.0 - gam * gam)).reshape(-1, hh)
            da_pre = (dalpha * alpha * (1.0 - alpha)).reshape(-1, hh)
            _add(grads, pre + f"gam_w{ck}", sc * (u2.T @ dg_pre))
            _add(grads, pre + f"gam_b{ck}", dg_pre.sum(axis=0))
            _add(grads, pre + f"ori_w{ck}", u2.T @ da_pre)
            _add(grads, pre + f"ori_b{ck}", da_pre.sum(axis=0))
            du += sc * (dg_pre @ params[pre + f"gam_w{ck}"].T) + da_pre @ params[pre + f"ori_w{ck}"].T
        else:
            t = aux["t"]
            dt = np.stack([dg["t_rr"], dg["t_dr"], dg["t_dd"]], axis=-1) * (1.0 - t * t)
            dt = dt.reshape(-1, hh * 3)
            _add(grads, pre + f"tr_w{ck}", sc * (u2.T @ dt))
            _add(grads, pre + f"tr_b{ck}", dt.sum(axis=0))
            du += sc * (dt @ params[pre + f"tr_w{ck}"].T)
    for name, dz, width in (("wq", dq, hh * kd), ("wk", dk, hh * kd), ("wv", dv, hh * vd)):
        dz = dz.reshape(-1, width)
        _add(grads, pre + name, u2.T @ dz)
        du += dz @ params[pre + name].T
    dxn, dgain = _rms_backward(du.reshape(u.shape), params[pre + "norm_gain"], cache["norm_cache"])
    _add(grads, pre + "norm_gain", dgain)
    return dx + dxn


def layer_forward(cfg: LayerConfig, tokens: np.ndarray, params: dict, prefix: str = "b0.", mode: str | None = None, backend=None):
    """One pLSTM block on ``(B, X, Y, E)`` tokens."""
    tokens = np.asarray(tokens, dtype=float)
    if tokens.ndim != 4 or tokens.shape[-1] != cfg.embed_dim:
        raise ShapeError(f"tokens must be (B, X, Y, {cfg.embed_dim}), got {tokens.shape}")
    if mode is None:
        mode = cfg.block_mode(int(prefix[1:].split(".")[0]) if prefix.startswith("b") else 0)
    out, _ = _block_forward(tokens, params, prefix, mode, cfg, backend)
    return out


def induced_gates(cfg: LayerConfig, tokens: np.ndarray, params: dict, prefix: str, mode: str, batch: int, head: int):
    """Per-cover :class:`GridGates`, direct term and ``q, k, v`` that one head of a block evaluates.

    The returned arrays are in node-id order, ready for ``grid.multidirectional_2d``.
    """
    x = np.asarray(tokens, dtype=float)
    b, nx, ny, e = x.shape
    u, _ = _rms_forward(x, params[prefix + "norm_gain"], cfg.rmsnorm_eps)
    hh, kd, vd = cfg.num_heads, cfg.key_dim, cfg.value_dim
    sel = lambda a: a[batch, :, :, head]
    covers = {}
    for c, combo in enumerate(COMBOS):
        g, _ = _cover_gates(u, params, prefix, c, mode, cfg)
        covers[combo] = GridGates(*(sel(g[n]) for n in _KERNEL_ORDER), np.zeros((nx, ny)))
    direct = sel(sigmoid(u @ params[prefix + "dir_w"] + params[prefix + "dir_b"]))
    ids = lambda a: a.transpose(1, 0, 2).reshape(nx * ny, -1)
    q = ids(sel((u @ params[prefix + "wq"]).reshape(b, nx, ny, hh, kd)))
    k = ids(sel((u @ params[prefix + "wk"]).reshape(b, nx, ny, hh, kd)))
    v = ids(sel((u @ params[prefix + "wv"]).reshape(b, nx, ny, hh, vd)))
    return covers, direct, q, k, v


def pre_norm_hidden(cfg: LayerConfig, tokens, params, prefix: str, mode: str):
    """Per-head hidden field ``(B, X, Y, H, V)`` before the multi-head norm (for cross-checks)."""
    _, cache = _block_forward(np.asarray(tokens, float), params, prefix, mode, cfg)
    return cache["nh"] * cache["r"]


def pool_corners(tokens: np.ndarray) -> np.ndarray:
    """Mean of the four corner tokens of ``(..., X, Y, E)``."""
    t = np.asarray(tokens)
    if t.ndim < 3 or t.shape[-3] < 2 or t.shape[-2] < 2:
        raise ShapeError("corner pooling needs a grid of at least 2x2")
    return (t[..., 0, 0, :] + t[..., -1, 0, :] + t[..., 0, -1, :] + t[..., -1, -1, :]) / 4.0


# -- model ----------------------------------------------------------------------------------------


def patchify(images: np.ndarray, patch: int) -> np.ndarray:
    """``(B, H, W)`` or ``(B, H, W, C)`` images to ``(B, X, Y, patch*patch*C)`` with ``X`` along width."""
    img = np.asarray(images, dtype=float)
    if img.ndim == 3:
        img = img[..., None]
    b, hgt, wid, ch = img.shape
    if hgt % patch or wid % patch:
        raise ShapeError(f"image {hgt}x{wid} not divisible by patch {patch}")
    t = img.reshape(b, hgt // patch, patch, wid // patch, patch, ch)
    return t.transpose(0, 3, 1, 2, 4, 5).reshape(b, wid // patch, hgt // patch, patch * patch * ch)


def model_forward(cfg: ModelConfig, params: dict, images: np.ndarray, backend=None):
    """Logits ``(B,)`` and a cache for :func:`model_backward`. Images are floats in [0, 1]."""
    patches = patchify(images, cfg.patch_size)
    x = patches @ params["pe_w"] + params["pe_b"]
    if cfg.pos_embedding:
        x = x + params["pos"]
    caches = []
    for i in range(cfg.num_blocks):
        x, c = _block_forward(x, params, f"b{i}.", cfg.layer.block_mode(i), cfg.layer, backend)
        caches.append(c)
    pooled = pool_corners(x)
    logits = pooled @ params["head_w"] + params["head_b"]
    return logits, dict(patches=patches, caches=caches, pooled=pooled, grid=x.shape)


def bce_loss(logits, labels) -> float:
    loss = float(np.mean(softplus(logits) - labels * logits))
    if not math.isfinite(loss):
        raise NonFiniteLoss("loss is not finite")
    return loss


def model_loss(cfg: ModelConfig, params: dict, images, labels, backend=None) -> float:
    logits, _ = model_forward(cfg, params, images, backend)
    return bce_loss(logits, np.asarray(labels, dtype=float))


def model_backward(cfg: ModelConfig, params: dict, images, labels, backend=None):
    """Mean BCE loss and its exact gradient for every parameter."""
    labels = np.asarray(labels, dtype=float)
    logits, cache = model_forward(cfg, params, images, backend)
    loss = bce_loss(logits, labels)
    b = logits.shape[0]
    dlogit = (sigmoid(logits) - labels) / b
    grads: dict[str, np.ndarray] = {
        "head_b": np.asarray(dlogit.sum()),
        "head_w": cache["pooled"].T @ dlogit,
    }
    dpooled = np.outer(dlogit, params["head_w"])
    dx = np.zeros(cache["grid"])
    for ix, iy in ((0, 0), (-1, 0), (0, -1), (-1, -1)):
        dx[:, ix, iy] += dpooled / 4.0
    for i in reversed(range(cfg.num_blocks)):
        dx = _block_backward(dx, params, f"b{i}.", cache["caches"][i], cfg.layer, grads, backend)
    if cfg.pos_embedding:
        grads["pos"] = dx.sum(axis=0)
    p2 = cache["patches"].reshape(-1, cache["patches"].shape[-1])
    grads["pe_w"] = p2.T @ dx.reshape(-1, dx.shape[-1])
    grads["pe_b"] = dx.reshape(-1, dx.shape[-1]).sum(axis=0)
    for key in params:
        grads.setdefault(key, np.zeros_like(params[key]))
    return loss, grads


def accuracy(cfg: ModelConfig, params: dict, images, labels) -> float:
    logits, _ = model_forward(cfg, params, images)
    return float(np.mean((logits > 0).astype(int) == np.asarray(labels)))


# -- data and training ----------------------------------------------------------------------------


def prepare_images(images: np.ndarray, size: int) -> np.ndarray:
    """uint8 ``(N, R, R)`` to floats in [0, 1] with strokes as 1, average-pooled down to ``size``."""
    x = 1.0 - np.asarray(images, dtype=float) / 255.0
    n, res = x.shape[0], x.shape[1]
    if res % size:
        raise DatasetError(f"image resolution {res} is not a multiple of {size}")
    f = res // size
    return x.reshape(n, size, f, size, f).mean(axis=(2, 4))


@dataclass
class TrainResult:
    losses: list[float]
    accuracy: float
    params: dict

    def loss_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "loss"])
        for i, loss in enumerate(self.losses):
            w.writerow([i, repr(loss)])
        return buf.getvalue()


def train_toy(
    images,
    labels,
    cfg: ModelConfig | None = None,
    steps: int = 50,
    seed: int = 0,
    lr: float = 1e-2,
    optimizer: str = "adam",
) -> TrainResult:
    """Full-batch training with a constant step size.

    ``optimizer`` is ``"adam"`` (betas 0.9/0.999, eps 1e-8) or ``"gd"`` (plain
    gradient descent). ``losses[i]`` is the loss before step ``i``; the list
    has ``steps + 1`` entries, the last being the final loss.
    """
    cfg = cfg or ModelConfig()
    if optimizer not in ("adam", "gd"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    x = prepare_images(images, cfg.image_size) if np.asarray(images).dtype == np.uint8 else np.asarray(images, float)
    y = np.asarray(labels, dtype=float)
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise DatasetError("images and labels disagree or are empty")
    params = init_params(cfg, seed)
    m1 = {k: np.zeros_like(v) for k, v in params.items()}
    m2 = {k: np.zeros_like(v) for k, v in params.items()}
    losses = []
    for t in range(1, steps + 1):
        loss, grads = model_backward(cfg, params, x, y)
        losses.append(loss)
        for key in params:
            g = grads[key]
            if optimizer == "gd":
                params[key] = params[key] - lr * g
                continue
            m1[key] = 0.9 * m1[key] + 0.1 * g
            m2[key] = 0.999 * m2[key] + 0.001 * g * g
            mhat = m1[key] / (1.0 - 0.9**t)
            vhat = m2[key] / (1.0 - 0.999**t)
            params[key] = params[key] - lr * mhat / (np.sqrt(vhat) + 1e-8)
    losses.append(model_loss(cfg, params, x, y))
    return TrainResult(losses, accuracy(cfg, params, x, y), params)


# -- checkpoints ----------------------------------------------------------------------------------


def save_checkpoint(path: str | Path, cfg: ModelConfig, params: dict) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    tensors = {}
    for name in sorted(params):
        fname = name.replace(".", "_") + ".ptnsr"
        tensorio.save(root / fname, params[name])
        tensors[name] = {"file": fname, "shape": list(np.shape(params[name]))}
    manifest = {"config": asdict(cfg), "tensors": tensors}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, dict]:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    conf = manifest["config"]
    layer = dict(conf.pop("layer"))
    layer["orientation_bias_range"] = tuple(layer["orientation_bias_range"])
    cfg = ModelConfig(layer=LayerConfig(**layer), **conf)
    params = {}
    for name, info in manifest["tensors"].items():
        arr = tensorio.load(root / info["file"])
        if list(arr.shape) != info["shape"]:
            raise ShapeError(f"{name}: file shape {arr.shape} disagrees with manifest {info['shape']}")
        params[name] = arr
    return cfg, params
