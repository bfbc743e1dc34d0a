"""Pre-norm transformer encoder for two-class credibility scoring.

All tensor work is plain numpy so that every gradient in the backward pass
is written out by hand and can be audited against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import erf

LN_EPS = 1e-5
INIT_STD = 0.02
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

Batch = Sequence[tuple[Sequence[int], int]]


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 32
    n_heads: int = 2
    n_layers: int = 2
    d_ff: int = 64
    max_len: int = 64
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be at least 1")
        for name in ("d_model", "n_heads", "d_ff", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        # zero layers is a legal degenerate model: softmax regression over
        # the mean-pooled embeddings
        if self.n_layers < 0:
            raise ValueError("n_layers must be non-negative")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.n_classes != 2:
            raise ValueError("only two-class heads are supported")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_json(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "max_len": self.max_len,
            "n_classes": self.n_classes,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**{k: int(obj[k]) for k in (
            "vocab_size", "d_model", "n_heads", "n_layers", "d_ff",
            "max_len", "n_classes", "seed")})


def _array_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    d, dff, c = config.d_model, config.d_ff, config.n_classes
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("tok_emb", (config.vocab_size, d)),
        ("pos_emb", (config.max_len, d)),
    ]
    for i in range(config.n_layers):
        shapes += [
            (f"l{i}.ln1.g", (d,)),
            (f"l{i}.ln1.b", (d,)),
            (f"l{i}.attn.wq", (d, d)),
            (f"l{i}.attn.bq", (d,)),
            (f"l{i}.attn.wk", (d, d)),
            (f"l{i}.attn.bk", (d,)),
            (f"l{i}.attn.wv", (d, d)),
            (f"l{i}.attn.bv", (d,)),
            (f"l{i}.attn.wo", (d, d)),
            (f"l{i}.attn.bo", (d,)),
            (f"l{i}.ln2.g", (d,)),
            (f"l{i}.ln2.b", (d,)),
            (f"l{i}.ff.w1", (d, dff)),
            (f"l{i}.ff.b1", (dff,)),
            (f"l{i}.ff.w2", (dff, d)),
            (f"l{i}.ff.b2", (d,)),
        ]
    shapes += [("head.w", (d, c)), ("head.b", (c,))]
    return shapes


def _is_gain(name: str) -> bool:
    return name.endswith("ln1.g") or name.endswith("ln2.g")


@dataclass
class ModelParameters:
    """Named parameter arrays in a fixed canonical order."""

    config: ModelConfig
    arrays: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self) -> None:
        expected = _array_shapes(self.config)
        if [n for n, _ in expected] != list(self.arrays.keys()):
            raise ValueError("parameter arrays do not match the model layout")
        for name, shape in expected:
            if self.arrays[name].shape != shape:
                raise ValueError(f"array {name!r} has shape {self.arrays[name].shape}, expected {shape}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.arrays.items())

    @property
    def dtype(self) -> np.dtype:
        return self.arrays["tok_emb"].dtype

    @property
    def n_parameters(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def astype(self, dtype) -> "ModelParameters":
        return ModelParameters(self.config, {k: v.astype(dtype) for k, v in self.arrays.items()})

    @classmethod
    def init(cls, config: ModelConfig, dtype=np.float64) -> "ModelParameters":
        rng = np.random.default_rng(config.seed)
        arrays: dict[str, np.ndarray] = {}
        for name, shape in _array_shapes(config):
            if _is_gain(name):
                arr = np.ones(shape)
            elif len(shape) == 1:
                arr = np.zeros(shape)
            else:
                arr = rng.normal(0.0, INIT_STD, shape)
            arrays[name] = arr.astype(dtype)
        return cls(config, arrays)

    @classmethod
    def zeros(cls, config: ModelConfig, dtype=np.float64) -> "ModelParameters":
        return cls(config, {n: np.zeros(s, dtype=dtype) for n, s in _array_shapes(config)})


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT2PI


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return g * xhat + b, (xhat, inv)


def _layer_norm_backward(dy: np.ndarray, g: np.ndarray, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _softmax_last(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _flat2(x: np.ndarray) -> np.ndarray:
    return x.reshape(-1, x.shape[-1])


def encode_batch(config: ModelConfig, batch: Batch):
    """Pad a batch of (token ids, label) pairs to a common length.

    Returns int ids [B, T], boolean mask [B, T] (True on real tokens) and
    int labels [B].
    """
    if len(batch) == 0:
        raise ValueError("batch is empty")
    lengths = []
    for seq, label in batch:
        if len(seq) == 0:
            raise ValueError("sequence is empty")
        if len(seq) > config.max_len:
            raise ValueError(f"sequence length {len(seq)} exceeds max_len {config.max_len}")
        if label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {label!r}")
        lengths.append(len(seq))
    t = max(lengths)
    ids = np.zeros((len(batch), t), dtype=np.int64)
    mask = np.zeros((len(batch), t), dtype=bool)
    labels = np.zeros(len(batch), dtype=np.int64)
    for row, (seq, label) in enumerate(batch):
        arr = np.asarray(seq, dtype=np.int64)
        if arr.min() < 0 or arr.max() >= config.vocab_size:
            raise ValueError("token id out of vocabulary range")
        ids[row, : len(seq)] = arr
        mask[row, : len(seq)] = True
        labels[row] = label
    return ids, mask, labels


def _forward_batch(params: ModelParameters, ids: np.ndarray, mask: np.ndarray,
                   delta: np.ndarray | None = None) -> dict:
    cfg = params.config
    b, t = ids.shape
    dtype = params.dtype
    fmask = mask.astype(dtype)
    x = params["tok_emb"][ids] + params["pos_emb"][:t][None, :, :]
    if delta is not None:
        if delta.shape != (b, t, cfg.d_model):
            raise ValueError(f"delta has shape {delta.shape}, expected {(b, t, cfg.d_model)}")
        x = x + delta * fmask[:, :, None]
    cache: dict = {"ids": ids, "mask": mask, "layers": []}
    scale = 1.0 / math.sqrt(cfg.d_head)
    for i in range(cfg.n_layers):
        lc: dict = {"x_in": x}
        a, lc["ln1"] = _layer_norm(x, params[f"l{i}.ln1.g"], params[f"l{i}.ln1.b"])
        lc["a"] = a
        q = a @ params[f"l{i}.attn.wq"] + params[f"l{i}.attn.bq"]
        k = a @ params[f"l{i}.attn.wk"] + params[f"l{i}.attn.bk"]
        v = a @ params[f"l{i}.attn.wv"] + params[f"l{i}.attn.bv"]
        qh = q.reshape(b, t, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)
        kh = k.reshape(b, t, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)
        vh = v.reshape(b, t, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)
        scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
        # padded keys are removed before the softmax, not renormalized after
        scores = np.where(mask[:, None, None, :], scores, dtype.type(-np.inf))
        attn = _softmax_last(scores)
        ctx = (attn @ vh).transpose(0, 2, 1, 3).reshape(b, t, cfg.d_model)
        o = ctx @ params[f"l{i}.attn.wo"] + params[f"l{i}.attn.bo"]
        x = x + o
        lc.update(qh=qh, kh=kh, vh=vh, attn=attn, ctx=ctx)
        f_in, lc["ln2"] = _layer_norm(x, params[f"l{i}.ln2.g"], params[f"l{i}.ln2.b"])
        lc["x_mid"] = x
        lc["f_in"] = f_in
        h1 = f_in @ params[f"l{i}.ff.w1"] + params[f"l{i}.ff.b1"]
        gelu_h1 = _gelu(h1)
        x = x + gelu_h1 @ params[f"l{i}.ff.w2"] + params[f"l{i}.ff.b2"]
        lc.update(h1=h1, gelu_h1=gelu_h1)
        cache["layers"].append(lc)
    n_real = fmask.sum(axis=1)
    pooled = (x * fmask[:, :, None]).sum(axis=1) / n_real[:, None]
    logits = pooled @ params["head.w"] + params["head.b"]
    cache.update(x_final=x, fmask=fmask, n_real=n_real, pooled=pooled,
                 logits=logits, probs=_softmax_last(logits))
    return cache


def _backward_batch(params: ModelParameters, cache: dict, dlogits: np.ndarray,
                    with_param_grads: bool = True):
    cfg = params.config
    ids, mask, fmask = cache["ids"], cache["mask"], cache["fmask"]
    b, t = ids.shape
    grads: dict[str, np.ndarray] = {}
    if with_param_grads:
        grads["head.w"] = cache["pooled"].T @ dlogits
        grads["head.b"] = dlogits.sum(axis=0)
    dpooled = dlogits @ params["head.w"].T
    dx = fmask[:, :, None] * dpooled[:, None, :] / cache["n_real"][:, None, None]
    scale = 1.0 / math.sqrt(cfg.d_head)
    for i in reversed(range(cfg.n_layers)):
        lc = cache["layers"][i]
        dgelu = dx @ params[f"l{i}.ff.w2"].T
        dh1 = dgelu * _gelu_grad(lc["h1"])
        df_in = dh1 @ params[f"l{i}.ff.w1"].T
        if with_param_grads:
            grads[f"l{i}.ff.w2"] = _flat2(lc["gelu_h1"]).T @ _flat2(dx)
            grads[f"l{i}.ff.b2"] = dx.sum(axis=(0, 1))
            grads[f"l{i}.ff.w1"] = _flat2(lc["f_in"]).T @ _flat2(dh1)
            grads[f"l{i}.ff.b1"] = dh1.sum(axis=(0, 1))
        dx_ln2, dg2, db2 = _layer_norm_backward(df_in, params[f"l{i}.ln2.g"], lc["ln2"])
        if with_param_grads:
            grads[f"l{i}.ln2.g"] = dg2
            grads[f"l{i}.ln2.b"] = db2
        dx_mid = dx + dx_ln2
        dctx = (dx_mid @ params[f"l{i}.attn.wo"].T).reshape(
            b, t, cfg.n_heads, cfg.d_head).transpose(0, 2, 1, 3)
        if with_param_grads:
            ctx_flat = _flat2(lc["ctx"])
            grads[f"l{i}.attn.wo"] = ctx_flat.T @ _flat2(dx_mid)
            grads[f"l{i}.attn.bo"] = dx_mid.sum(axis=(0, 1))
        attn = lc["attn"]
        dattn = dctx @ lc["vh"].transpose(0, 1, 3, 2)
        dvh = attn.transpose(0, 1, 3, 2) @ dctx
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dqh = (dscores @ lc["kh"]) * scale
        dkh = (dscores.transpose(0, 1, 3, 2) @ lc["qh"]) * scale
        dq = dqh.transpose(0, 2, 1, 3).reshape(b, t, cfg.d_model)
        dk = dkh.transpose(0, 2, 1, 3).reshape(b, t, cfg.d_model)
        dv = dvh.transpose(0, 2, 1, 3).reshape(b, t, cfg.d_model)
        if with_param_grads:
            a_flat = _flat2(lc["a"])
            grads[f"l{i}.attn.wq"] = a_flat.T @ _flat2(dq)
            grads[f"l{i}.attn.bq"] = dq.sum(axis=(0, 1))
            grads[f"l{i}.attn.wk"] = a_flat.T @ _flat2(dk)
            # shifting every score in a softmax row by a constant leaves the row
            # unchanged, so the key bias gradient is identically zero; it is kept
            # for the shape contract
            grads[f"l{i}.attn.bk"] = dk.sum(axis=(0, 1))
            grads[f"l{i}.attn.wv"] = a_flat.T @ _flat2(dv)
            grads[f"l{i}.attn.bv"] = dv.sum(axis=(0, 1))
        da = (dq @ params[f"l{i}.attn.wq"].T
              + dk @ params[f"l{i}.attn.wk"].T
              + dv @ params[f"l{i}.attn.wv"].T)
        dx_ln1, dg1, db1 = _layer_norm_backward(da, params[f"l{i}.ln1.g"], lc["ln1"])
        if with_param_grads:
            grads[f"l{i}.ln1.g"] = dg1
            grads[f"l{i}.ln1.b"] = db1
        dx = dx_mid + dx_ln1
    ddelta = dx * fmask[:, :, None]
    if with_param_grads:
        dtok = np.zeros_like(params["tok_emb"])
        np.add.at(dtok, ids[mask], dx[mask])
        dpos = np.zeros_like(params["pos_emb"])
        dpos[:t] = dx.sum(axis=0)
        grads["tok_emb"] = dtok
        grads["pos_emb"] = dpos
        ordered = {name: grads[name] for name, _ in _array_shapes(params.config)}
        return ModelParameters(params.config, ordered), ddelta
    return None, ddelta


def _cross_entropy(cache: dict, labels: np.ndarray):
    logits = cache["logits"]
    b = logits.shape[0]
    lmax = logits.max(axis=-1, keepdims=True)
    lse = lmax[:, 0] + np.log(np.exp(logits - lmax).sum(axis=-1))
    loss = float((lse - logits[np.arange(b), labels]).mean())
    dlogits = cache["probs"].copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    return loss, dlogits


def forward(params: ModelParameters, token_ids: Sequence[int],
            delta: np.ndarray | None = None):
    """Run a single sequence; returns (class probabilities, cache).

    The cache carries per-layer attention maps under "attention" as one
    [n_heads, T, T] array per layer.
    """
    batch = [(list(token_ids), 0)]
    ids, mask, _ = encode_batch(params.config, batch)
    d = None
    if delta is not None:
        delta = np.asarray(delta, dtype=params.dtype)
        if delta.shape != (ids.shape[1], params.config.d_model):
            raise ValueError(f"delta has shape {delta.shape}, expected "
                             f"{(ids.shape[1], params.config.d_model)}")
        d = delta[None, :, :]
    cache = _forward_batch(params, ids, mask, d)
    cache["attention"] = [lc["attn"][0] for lc in cache["layers"]]
    return cache["probs"][0], cache


def predict(params: ModelParameters, batch: Batch) -> np.ndarray:
    """Class predictions for a batch; ties resolve to class 1."""
    ids, mask, _ = encode_batch(params.config, batch)
    probs = _forward_batch(params, ids, mask)["probs"]
    return np.where(probs[:, 1] >= probs[:, 0], 1, 0)


def batch_loss(params: ModelParameters, batch: Batch,
               delta: np.ndarray | None = None) -> float:
    """Mean cross-entropy without any backward pass."""
    ids, mask, labels = encode_batch(params.config, batch)
    cache = _forward_batch(params, ids, mask, delta)
    loss, _ = _cross_entropy(cache, labels)
    return loss


def loss_and_grad(params: ModelParameters, batch: Batch,
                  delta: np.ndarray | None = None, with_param_grads: bool = True):
    """Mean cross-entropy over a batch plus analytic gradients.

    Returns (loss, parameter gradients or None, gradient w.r.t. the embedding
    perturbation delta as a [B, T, d_model] array zeroed on padding).
    """
    ids, mask, labels = encode_batch(params.config, batch)
    if delta is not None:
        delta = np.asarray(delta, dtype=params.dtype)
    cache = _forward_batch(params, ids, mask, delta)
    loss, dlogits = _cross_entropy(cache, labels)
    grads, ddelta = _backward_batch(params, cache, dlogits, with_param_grads)
    return loss, grads, ddelta


def gradcheck_instance(d_model: int = 16, n_layers: int = 1, batch_size: int = 4,
                       seed: int = 6, dtype=np.float64, vocab_size: int = 50,
                       init_std: float = 0.2):
    """A well-conditioned random (params, batch) pair for the FD oracle.

    The training-time init scale (0.02) leaves attention-path gradients
    below what finite differences of a ~0.7 loss can resolve, so the oracle
    instance draws wider.
    """
    config = ModelConfig(vocab_size=vocab_size, d_model=d_model, n_heads=2,
                         n_layers=n_layers, d_ff=2 * d_model, max_len=16, seed=seed)
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in _array_shapes(config):
        arr = np.ones(shape) if _is_gain(name) else rng.normal(0.0, init_std, shape)
        arrays[name] = arr.astype(dtype)
    params = ModelParameters(config, arrays)
    batch = []
    for _ in range(batch_size):
        length = int(rng.integers(3, 9))
        ids = [int(x) for x in rng.integers(0, vocab_size, size=length)]
        batch.append((ids, int(rng.integers(0, 2))))
    return params, batch


def _sample_coords(params: ModelParameters, ids: np.ndarray, mask: np.ndarray,
                   n_samples: int, rng) -> list[tuple[str, int]]:
    # the loss is constant along three families of directions: key-projection
    # biases (softmax row-shift invariance), embedding rows of tokens absent
    # from the batch, and positions past the longest sequence; differencing a
    # constant measures pure roundoff, so those coordinates stay out of the
    # sample
    d = params.config.d_model
    used_tokens = np.unique(ids[mask])
    tok_coords = [int(row * d + j) for row in used_tokens for j in range(d)]
    pos_coords = list(range(ids.shape[1] * d))
    pools: dict[str, list[int] | None] = {"tok_emb": tok_coords, "pos_emb": pos_coords}
    names = [name for name, _ in params.items() if not name.endswith("attn.bk")]
    per_array = max(1, -(-n_samples // len(names)))
    coords: list[tuple[str, int]] = []
    for name in names:
        pool = pools.get(name)
        if pool is not None:
            take = min(per_array, len(pool))
            chosen = rng.choice(len(pool), size=take, replace=False)
            coords.extend((name, pool[int(i)]) for i in chosen)
        else:
            size = params[name].size
            take = min(per_array, size)
            coords.extend((name, int(flat)) for flat in rng.choice(size, size=take, replace=False))
    while len(coords) < n_samples:
        coords.append(("tok_emb", tok_coords[int(rng.integers(len(tok_coords)))]))
    return coords


def _fd_central(loss_at, arr: np.ndarray, flat: int, h: float) -> float:
    # fourth-order central stencil: the second-order two-point rule cannot
    # resolve near-zero gradients against the roundoff of a ~0.7 loss
    orig = arr.flat[flat]
    vals = []
    for c in (-2.0, -1.0, 1.0, 2.0):
        arr.flat[flat] = orig + c * h
        vals.append(loss_at())
    arr.flat[flat] = orig
    f_m2, f_m1, f_p1, f_p2 = vals
    return (f_m2 - 8.0 * f_m1 + 8.0 * f_p1 - f_p2) / (12.0 * h)


def gradient_check(params: ModelParameters, batch: Batch, fd_epsilon: float = 1e-3,
                   n_samples: int = 200, seed: int = 0,
                   delta_scale: float = 0.01) -> dict:
    """Compare analytic gradients against central finite differences.

    Finite differences always run on a float64 working copy with step
    fd_epsilon * max(1, |coordinate|); the analytic side runs in the
    parameters' own dtype. Returns a report with the worst relative error
    over sampled parameter coordinates and every real-token delta
    coordinate.
    """
    if fd_epsilon <= 0.0:
        raise ValueError("fd_epsilon must be positive")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    ids, mask, _ = encode_batch(params.config, batch)
    b, t = ids.shape
    d = params.config.d_model
    delta = rng.uniform(-delta_scale, delta_scale, (b, t, d)) * mask[:, :, None]
    delta = delta.astype(params.dtype)

    loss, grads, ddelta = loss_and_grad(params, batch, delta)
    if not math.isfinite(loss):
        raise ValueError("loss is not finite")

    work = params.astype(np.float64)
    wdelta = delta.astype(np.float64)
    loss_at = lambda: batch_loss(work, batch, wdelta)

    def rel_err(analytic: float, fd: float) -> float:
        return abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)

    worst = 0.0
    checked = 0
    for name, flat in _sample_coords(params, ids, mask, n_samples, rng):
        arr = work.arrays[name]
        h = fd_epsilon * max(1.0, abs(arr.flat[flat]))
        fd = _fd_central(loss_at, arr, flat, h)
        worst = max(worst, rel_err(float(grads[name].flat[flat]), fd))
        checked += 1

    for row, col in np.argwhere(mask):
        for j in range(d):
            flat = int((row * t + col) * d + j)
            h = fd_epsilon * max(1.0, abs(wdelta[row, col, j]))
            fd = _fd_central(loss_at, wdelta, flat, h)
            worst = max(worst, rel_err(float(ddelta[row, col, j]), fd))
            checked += 1

    return {
        "max_rel_err": worst,
        "n_checked": checked,
        "loss": loss,
        "dtype": str(params.dtype),
    }
