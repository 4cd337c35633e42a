"""Highway LSTM tagger with hand-written backpropagation.

The stack alternates direction per layer (F, B, F, B by default). Each
layer mixes its LSTM output with its (projected) input through a sigmoid
gate computed from the input::

    y = g * h + (1 - g) * x~

The outputs of the last forward and last backward layers are concatenated
and projected onto the label set, followed by a per-token softmax.
Everything runs in float64.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .encoder import CHANNELS, DEFAULT_DIMS, EncodedSample, embed

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class TaggerError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, message, last_good, history):
        super().__init__(message)
        self.last_good = last_good
        self.history = history


@dataclass(frozen=True)
class TaggerConfig:
    vocab_sizes: Mapping[str, int]
    n_labels: int
    channel_dims: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_DIMS))
    hidden: tuple[int, ...] = (64, 64, 64, 64)
    directions: tuple[str, ...] = ("F", "B", "F", "B")

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "directions", tuple(self.directions))
        object.__setattr__(self, "vocab_sizes", {ch: int(self.vocab_sizes[ch]) for ch in CHANNELS})
        object.__setattr__(self, "channel_dims", {ch: int(self.channel_dims[ch]) for ch in CHANNELS})

    def check(self):
        if len(self.hidden) != len(self.directions) or not self.hidden:
            raise TaggerError("hidden sizes and directions must have the same non-zero length")
        if any(d not in ("F", "B") for d in self.directions):
            raise TaggerError(f"directions must be 'F' or 'B', got {self.directions}")
        dims = list(self.hidden) + [self.n_labels] + list(self.channel_dims.values()) + list(self.vocab_sizes.values())
        if any(d <= 0 for d in dims):
            raise TaggerError("all dimensions must be positive")

    @property
    def input_width(self) -> int:
        return sum(self.channel_dims[ch] for ch in CHANNELS) + 1

    def layer_inputs(self) -> list[int]:
        return [self.input_width] + list(self.hidden[:-1])

    def output_layers(self) -> list[int]:
        """Indices of the layers concatenated before the output projection."""
        last = {}
        for k, d in enumerate(self.directions):
            last[d] = k
        return sorted(last.values())

    @property
    def output_width(self) -> int:
        return sum(self.hidden[k] for k in self.output_layers())

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["directions"] = list(self.directions)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(vocab_sizes=d["vocab_sizes"], n_labels=d["n_labels"], channel_dims=d["channel_dims"],
                   hidden=tuple(d["hidden"]), directions=tuple(d["directions"]))


@dataclass
class TaggerParams:
    config: TaggerConfig
    arrays: dict[str, np.ndarray]

    def __getitem__(self, name):
        return self.arrays[name]

    def names(self) -> list[str]:
        return list(self.arrays)

    def copy(self) -> "TaggerParams":
        return TaggerParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def tables(self) -> dict[str, np.ndarray]:
        return {ch: self.arrays[f"emb.{ch}"] for ch in CHANNELS}

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())


def _glorot(rng, fan_in, fan_out, shape):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(config: TaggerConfig, seed: int) -> TaggerParams:
    config.check()
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for ch in CHANNELS:
        v, d = config.vocab_sizes[ch], config.channel_dims[ch]
        arrays[f"emb.{ch}"] = _glorot(rng, v, d, (v, d))
    for k, (d_in, h) in enumerate(zip(config.layer_inputs(), config.hidden)):
        # gate blocks ordered i, f, o, candidate
        arrays[f"L{k}.Wx"] = np.concatenate([_glorot(rng, d_in, h, (d_in, h)) for _ in range(4)], axis=1)
        arrays[f"L{k}.Wh"] = np.concatenate([_glorot(rng, h, h, (h, h)) for _ in range(4)], axis=1)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        arrays[f"L{k}.b"] = b
        arrays[f"L{k}.Wg"] = _glorot(rng, d_in, h, (d_in, h))
        arrays[f"L{k}.bg"] = np.full(h, -1.0)
        if d_in != h:
            arrays[f"L{k}.Wp"] = _glorot(rng, d_in, h, (d_in, h))
    arrays["out.W"] = _glorot(rng, config.output_width, config.n_labels, (config.output_width, config.n_labels))
    arrays["out.b"] = np.zeros(config.n_labels)
    return TaggerParams(config, arrays)


# -- forward -------------------------------------------------------------------


def _lstm_forward(x, Wx, Wh, b, reverse):
    n = x.shape[0]
    H = Wh.shape[0]
    dt = x.dtype
    zx = x @ Wx + b
    gates = np.empty((n, 4 * H), dtype=dt)
    c = np.empty((n, H), dtype=dt)
    tc = np.empty((n, H), dtype=dt)
    h = np.empty((n, H), dtype=dt)
    h_prev = np.empty((n, H), dtype=dt)
    c_prev = np.empty((n, H), dtype=dt)
    hp = np.zeros(H, dtype=dt)
    cp = np.zeros(H, dtype=dt)
    for t in (range(n - 1, -1, -1) if reverse else range(n)):
        z = zx[t] + hp @ Wh
        g = np.empty(4 * H, dtype=dt)
        g[:3 * H] = expit(z[:3 * H])
        g[3 * H:] = np.tanh(z[3 * H:])
        ct = g[H:2 * H] * cp + g[:H] * g[3 * H:]
        tct = np.tanh(ct)
        ht = g[2 * H:3 * H] * tct
        gates[t], c[t], tc[t], h[t], h_prev[t], c_prev[t] = g, ct, tct, ht, hp, cp
        hp, cp = ht, ct
    return h, dict(gates=gates, c=c, tc=tc, h_prev=h_prev, c_prev=c_prev, reverse=reverse)


def _lstm_backward(dh, x, Wx, Wh, cache):
    n, H = dh.shape
    gates, tc, h_prev, c_prev = cache["gates"], cache["tc"], cache["h_prev"], cache["c_prev"]
    dZ = np.empty((n, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    order = range(n) if cache["reverse"] else range(n - 1, -1, -1)
    for t in order:
        g = gates[t]
        i, f, o, cc = g[:H], g[H:2 * H], g[2 * H:3 * H], g[3 * H:]
        dht = dh[t] + dh_next
        dc = dht * o * (1.0 - tc[t] ** 2) + dc_next
        dz = dZ[t]
        dz[:H] = dc * cc * i * (1.0 - i)
        dz[H:2 * H] = dc * c_prev[t] * f * (1.0 - f)
        dz[2 * H:3 * H] = dht * tc[t] * o * (1.0 - o)
        dz[3 * H:] = dc * i * (1.0 - cc ** 2)
        dc_next = dc * f
        dh_next = Wh @ dz
    dWx = x.T @ dZ
    dWh = h_prev.T @ dZ
    db = dZ.sum(axis=0)
    dx = dZ @ Wx.T
    return dx, dWx, dWh, db


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(vectors: np.ndarray, params: TaggerParams, dtype=np.float64):
    """Token posteriors ``(n, n_labels)`` and the activation cache for :func:`backward`.

    ``dtype`` other than float64 is only used by the finite-difference oracle.
    """
    cfg = params.config
    x = np.asarray(vectors, dtype=dtype)
    if x.ndim != 2 or x.shape[0] == 0:
        raise TaggerError("expected a non-empty (n, width) input sequence")
    if x.shape[1] != cfg.input_width:
        raise TaggerError(f"input width {x.shape[1]} does not match the model ({cfg.input_width})")
    A = params.arrays
    if dtype is not np.float64:
        A = {k: v.astype(dtype) for k, v in A.items() if not k.startswith("emb.")}
    layers = []
    inp = x
    for k, direction in enumerate(cfg.directions):
        h, lcache = _lstm_forward(inp, A[f"L{k}.Wx"], A[f"L{k}.Wh"], A[f"L{k}.b"], direction == "B")
        gate = expit(inp @ A[f"L{k}.Wg"] + A[f"L{k}.bg"])
        carry = inp @ A[f"L{k}.Wp"] if f"L{k}.Wp" in A else inp
        y = gate * h + (1.0 - gate) * carry
        layers.append(dict(x=inp, h=h, gate=gate, carry=carry, lstm=lcache))
        inp = y
    outs = cfg.output_layers()
    ys = [layers[k + 1]["x"] if k + 1 < len(layers) else inp for k in outs]
    feats = np.concatenate(ys, axis=1)
    probs = softmax(feats @ A["out.W"] + A["out.b"])
    return probs, dict(layers=layers, feats=feats, probs=probs, outs=outs)


def loss(posteriors: np.ndarray, gold: Sequence[int]) -> float:
    """Mean negative log-likelihood of the gold labels."""
    gold = np.asarray(gold)
    if len(gold) != len(posteriors):
        raise TaggerError("posteriors and gold labels differ in length")
    p = posteriors[np.arange(len(gold)), gold]
    return float(-np.mean(np.log(np.maximum(p, PROB_FLOOR))))


def backward(cache, gold: Sequence[int], params: TaggerParams, scale: float = 1.0):
    """Gradients of ``scale * loss`` for all non-embedding parameters, plus d(input)."""
    cfg = params.config
    A = params.arrays
    gold = np.asarray(gold)
    probs = cache["probs"]
    n = probs.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(n), gold] -= 1.0
    dlogits *= scale / n
    grads = {"out.W": cache["feats"].T @ dlogits, "out.b": dlogits.sum(axis=0)}
    dfeats = dlogits @ A["out.W"].T

    layers = cache["layers"]
    L = len(layers)
    dys = [None] * L
    col = 0
    for k in cache["outs"]:
        w = cfg.hidden[k]
        dys[k] = dfeats[:, col:col + w].copy()
        col += w
    dinp = None
    for k in range(L - 1, -1, -1):
        lay = layers[k]
        dy = dys[k] if dys[k] is not None else np.zeros_like(lay["h"])
        if dinp is not None:
            dy = dy + dinp
        gate, h, carry, x = lay["gate"], lay["h"], lay["carry"], lay["x"]
        dh = dy * gate
        da = dy * (h - carry) * gate * (1.0 - gate)
        dcarry = dy * (1.0 - gate)
        dx, dWx, dWh, db = _lstm_backward(dh, x, A[f"L{k}.Wx"], A[f"L{k}.Wh"], lay["lstm"])
        grads[f"L{k}.Wx"], grads[f"L{k}.Wh"], grads[f"L{k}.b"] = dWx, dWh, db
        grads[f"L{k}.Wg"] = x.T @ da
        grads[f"L{k}.bg"] = da.sum(axis=0)
        dx += da @ A[f"L{k}.Wg"].T
        if f"L{k}.Wp" in A:
            grads[f"L{k}.Wp"] = x.T @ dcarry
            dx += dcarry @ A[f"L{k}.Wp"].T
        else:
            dx += dcarry
        dinp = dx
    return grads, dinp


def sample_gradients(params: TaggerParams, encoded: EncodedSample, gold: Sequence[int], scale: float = 1.0):
    """Loss and full gradient dict (embedding tables included) for one sample."""
    probs, cache = forward(embed(encoded, params.tables()), params)
    grads, dvec = backward(cache, gold, params, scale)
    col = 0
    for j, ch in enumerate(CHANNELS):
        d = params.config.channel_dims[ch]
        table = params.arrays[f"emb.{ch}"]
        g = np.zeros_like(table)
        np.add.at(g, encoded.ids[:, j], dvec[:, col:col + d])
        grads[f"emb.{ch}"] = g
        col += d
    return loss(probs, gold), grads


def predict_proba(params: TaggerParams, encoded: EncodedSample) -> np.ndarray:
    return forward(embed(encoded, params.tables()), params)[0]


# -- gradient check ------------------------------------------------------------


def _oracle_loss(params, encoded, gold):
    # the whole forward pass runs in extended precision: with float64
    # activations, rounding noise divided by 2*epsilon is comparable to the
    # smallest gradient entries
    ext = np.longdouble
    _, cache = forward(embed(encoded, params.tables()), params, dtype=ext)
    logits = cache["feats"] @ params.arrays["out.W"].astype(ext) + params.arrays["out.b"].astype(ext)
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    return (lse - logits[np.arange(len(gold)), np.asarray(gold)]).mean()


def pick_coordinates(params: TaggerParams, encoded: EncodedSample, n: int, rng) -> list[tuple[str, tuple]]:
    """Random coordinates: a tensor uniformly, then an entry uniformly.

    Embedding tables only offer rows used by the sample.
    """
    names = params.names()
    used = {ch: np.unique(encoded.ids[:, j]) for j, ch in enumerate(CHANNELS)}
    coords = []
    for _ in range(n):
        name = names[rng.integers(len(names))]
        arr = params.arrays[name]
        if name.startswith("emb."):
            rows = used[name[4:]]
            idx = (int(rows[rng.integers(len(rows))]), int(rng.integers(arr.shape[1])))
        else:
            idx = tuple(int(rng.integers(s)) for s in arr.shape)
        coords.append((name, idx))
    return coords


def numeric_gradient(params, encoded, gold, name, idx, epsilon):
    arr = params.arrays[name]
    old = arr[idx]
    arr[idx] = old + epsilon
    up = _oracle_loss(params, encoded, gold)
    arr[idx] = old - epsilon
    down = _oracle_loss(params, encoded, gold)
    arr[idx] = old
    return float((up - down) / (2.0 * epsilon))


def relative_error(ga, gn):
    return abs(ga - gn) / max(abs(ga), abs(gn), 1e-8)


def grad_check_errors(params, encoded, gold, epsilon=1e-5, n_coords=200, seed=0, grads=None):
    """Per-coordinate ``(name, index, analytic, numeric, rel_error)`` rows."""
    if epsilon <= 0:
        raise TaggerError("epsilon must be positive")
    if grads is None:
        _, grads = sample_gradients(params, encoded, gold)
    rng = np.random.default_rng(seed)
    rows = []
    for name, idx in pick_coordinates(params, encoded, n_coords, rng):
        ga = float(grads[name][idx])
        gn = numeric_gradient(params, encoded, gold, name, idx, epsilon)
        rows.append((name, idx, ga, gn, relative_error(ga, gn)))
    return rows


def grad_check(params, encoded, gold, epsilon=1e-5, n_coords=200, seed=0, grads=None) -> float:
    """Max relative error between analytic and central-difference gradients."""
    return max(r[4] for r in grad_check_errors(params, encoded, gold, epsilon, n_coords, seed, grads))


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 1
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 5.0
    patience: int = 5

    def to_dict(self):
        return asdict(self)


class Adam:
    def __init__(self, params: TaggerParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.t = 0

    def step(self, params: TaggerParams, grads):
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            params.arrays[name] -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)


def clip_gradients(grads, max_norm):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        s = max_norm / norm
        for g in grads.values():
            g *= s
    return norm


def token_accuracy(params: TaggerParams, data) -> float:
    right = total = 0
    for encoded, gold in data:
        pred = predict_proba(params, encoded).argmax(axis=1)
        right += int(np.sum(pred == np.asarray(gold)))
        total += len(gold)
    return right / total if total else 0.0


def train(data: Sequence[tuple[EncodedSample, np.ndarray]], config: TaggerConfig, train_config: TrainConfig,
          seed: int, dev_eval: Callable[[TaggerParams], float] | None = None, params: TaggerParams | None = None):
    """Adam training over encoded samples; returns ``(params, history)``.

    ``history`` holds one dict per completed epoch with the mean training
    loss and, when ``dev_eval`` is given, its score. With ``dev_eval`` the
    run stops after ``patience`` epochs without improvement and the best
    parameters are returned.
    """
    if not data:
        raise TaggerError("no training samples")
    init_seed, order_seed = np.random.SeedSequence(seed).generate_state(2)
    params = params.copy() if params is not None else init_params(config, int(init_seed))
    opt = Adam(params, train_config)
    rng = np.random.default_rng(int(order_seed))
    history = []
    best = (-math.inf, None)
    stale = 0
    bs = max(1, train_config.batch_size)
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(order), bs):
            batch = order[start:start + bs]
            acc = None
            for i in batch:
                encoded, gold = data[i]
                lval, grads = sample_gradients(params, encoded, gold, scale=1.0 / len(batch))
                if not math.isfinite(lval):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}", params.copy(), history)
                total += lval
                if acc is None:
                    acc = grads
                else:
                    for k in acc:
                        acc[k] += grads[k]
            clip_gradients(acc, train_config.clip_norm)
            snapshot = {k: v.copy() for k, v in params.arrays.items()}
            opt.step(params, acc)
            if not params.all_finite():
                params.arrays = snapshot
                raise TrainingDiverged(f"non-finite parameters at epoch {epoch}", params, history)
        entry = {"epoch": epoch, "loss": total / len(data)}
        if dev_eval is not None:
            score = float(dev_eval(params))
            entry["dev_f"] = score
            if score > best[0]:
                best = (score, params.copy())
                stale = 0
            else:
                stale += 1
        history.append(entry)
        log.debug("epoch %d loss %.5f", epoch, entry["loss"])
        if dev_eval is not None and stale >= train_config.patience:
            break
    if dev_eval is not None and best[1] is not None:
        params = best[1]
    return params, history
