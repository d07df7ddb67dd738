"""Tiny MLP function approximator with hand-written reverse-mode gradients.

Two fixed head architectures on a shared rectifier trunk: a dueling Q head
(Q = V + A - mean A) and a policy/value head (masked-softmax logits plus a
scalar value).  Parameters live in one flat float64 vector with a named
layer manifest, so optimizers, checkpoints and the wire protocol all move a
single array.  No autodiff framework; backward passes mirror the forward
code line by line and are audited against finite differences in the tests.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

DUELING_Q = "dueling_q"
POLICY_VALUE = "policy_value"

CHECKPOINT_MAGIC = b"MZNET\x00"
CHECKPOINT_VERSION = 1


class ShapeMismatch(ValueError):
    """Input or gradient dimensions disagree with the NetSpec."""


class EmptyMask(ValueError):
    """A policy forward pass received a row with no available action."""


class GradientError(ValueError):
    """Optimizer rejected a non-finite gradient."""


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden: tuple[int, ...] = (256, 128)
    head: str = DUELING_Q
    n_actions: int = 119

    def __post_init__(self):
        if self.input_dim <= 0 or any(h <= 0 for h in self.hidden) or not self.hidden:
            raise ValueError("dimensions must be positive")
        if self.head not in (DUELING_Q, POLICY_VALUE):
            raise ValueError(f"unknown head {self.head!r}")
        if self.n_actions <= 0:
            raise ValueError("n_actions must be positive")


def manifest(spec: NetSpec) -> tuple[tuple[str, tuple[int, ...]], ...]:
    """Ordered (name, shape) layout of the flat parameter vector."""
    dims = (spec.input_dim, *spec.hidden)
    out = []
    for i in range(len(spec.hidden)):
        out.append((f"w{i}", (dims[i], dims[i + 1])))
        out.append((f"b{i}", (dims[i + 1],)))
    h = spec.hidden[-1]
    if spec.head == DUELING_Q:
        out.append(("wv", (h, 1)))
        out.append(("bv", (1,)))
        out.append(("wa", (h, spec.n_actions)))
        out.append(("ba", (spec.n_actions,)))
    else:
        out.append(("wp", (h, spec.n_actions)))
        out.append(("bp", (spec.n_actions,)))
        out.append(("wv", (h, 1)))
        out.append(("bv", (1,)))
    return tuple(out)


def param_count(spec: NetSpec) -> int:
    return sum(int(np.prod(shape)) for _, shape in manifest(spec))


class ParamVector:
    """Flat float64 parameter array plus named views into it.

    The views share memory with ``data``: in-place optimizer updates on the
    flat array are immediately visible through every view.
    """

    def __init__(self, spec: NetSpec, data: np.ndarray):
        n = param_count(spec)
        if data.shape != (n,) or data.dtype != np.float64:
            raise ShapeMismatch(f"expected float64 vector of length {n}")
        self.spec = spec
        self.data = data
        self.views: dict[str, np.ndarray] = {}
        offset = 0
        for name, shape in manifest(spec):
            size = int(np.prod(shape))
            self.views[name] = data[offset:offset + size].reshape(shape)
            offset += size

    def copy(self) -> "ParamVector":
        return ParamVector(self.spec, self.data.copy())


def init_params(spec: NetSpec, seed: int = 0) -> ParamVector:
    """Xavier-uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    data = np.zeros(param_count(spec), dtype=np.float64)
    pv = ParamVector(spec, data)
    for name, shape in manifest(spec):
        if name.startswith("w"):
            fan_in, fan_out = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            pv.views[name][...] = rng.uniform(-limit, limit, size=shape)
    return pv


# --- forward / backward -------------------------------------------------

def _check_input(pv: ParamVector, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != pv.spec.input_dim:
        raise ShapeMismatch(
            f"input shape {x.shape} does not match input_dim {pv.spec.input_dim}")
    return x


def _trunk_forward(pv: ParamVector, x: np.ndarray):
    v = pv.views
    acts = [x]          # post-activation per layer, acts[0] is the input
    pre = []            # pre-activation per layer, for the ReLU gate
    h = x
    for i in range(len(pv.spec.hidden)):
        z = h @ v[f"w{i}"] + v[f"b{i}"]
        h = np.maximum(z, 0.0)
        pre.append(z)
        acts.append(h)
    return h, (acts, pre)


def _trunk_backward(pv: ParamVector, cache, dh: np.ndarray, grad: "ParamVector"):
    acts, pre = cache
    v = pv.views
    g = grad.views
    for i in reversed(range(len(pv.spec.hidden))):
        dz = dh * (pre[i] > 0.0)
        g[f"w{i}"] += acts[i].T @ dz
        g[f"b{i}"] += dz.sum(axis=0)
        dh = dz @ v[f"w{i}"].T
    return dh


def forward_q(pv: ParamVector, x: np.ndarray, cache: bool = False):
    """Dueling Q values, shape (batch, n_actions)."""
    if pv.spec.head != DUELING_Q:
        raise ShapeMismatch("parameter vector has no dueling head")
    x = _check_input(pv, x)
    h, trunk_cache = _trunk_forward(pv, x)
    v = pv.views
    value = h @ v["wv"] + v["bv"]                      # (B, 1)
    adv = h @ v["wa"] + v["ba"]                        # (B, A)
    q = value + adv - adv.mean(axis=1, keepdims=True)
    if cache:
        return q, (x, h, trunk_cache)
    return q


def backward_q(pv: ParamVector, cache, dq: np.ndarray) -> ParamVector:
    """Gradient of sum(dq * Q) with respect to every parameter."""
    x, h, trunk_cache = cache
    if dq.shape != (x.shape[0], pv.spec.n_actions):
        raise ShapeMismatch(f"upstream gradient shape {dq.shape}")
    grad = ParamVector(pv.spec, np.zeros_like(pv.data))
    g = grad.views
    v = pv.views
    # dueling aggregation: dV = row-sum of dQ, dA = dQ mean-centered per row
    dvalue = dq.sum(axis=1, keepdims=True)
    dadv = dq - dq.mean(axis=1, keepdims=True)
    g["wv"] += h.T @ dvalue
    g["bv"] += dvalue.sum(axis=0)
    g["wa"] += h.T @ dadv
    g["ba"] += dadv.sum(axis=0)
    dh = dvalue @ v["wv"].T + dadv @ v["wa"].T
    _trunk_backward(pv, trunk_cache, dh, grad)
    return grad


def _check_mask(mask: np.ndarray, batch: int, n_actions: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 1:
        mask = np.broadcast_to(mask, (batch, n_actions))
    if mask.shape != (batch, n_actions):
        raise ShapeMismatch(f"mask shape {mask.shape}")
    if not mask.any(axis=1).all():
        raise EmptyMask("a mask row has no available action")
    return mask


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over masked-in entries; masked-out probabilities exactly 0."""
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)                      # exp(-inf) is exactly 0
    return e / e.sum(axis=1, keepdims=True)


def forward_policy_value(pv: ParamVector, x: np.ndarray, mask: np.ndarray,
                         cache: bool = False):
    """(probs over masked-in actions, state value)."""
    if pv.spec.head != POLICY_VALUE:
        raise ShapeMismatch("parameter vector has no policy head")
    x = _check_input(pv, x)
    mask = _check_mask(mask, x.shape[0], pv.spec.n_actions)
    h, trunk_cache = _trunk_forward(pv, x)
    v = pv.views
    logits = h @ v["wp"] + v["bp"]
    value = (h @ v["wv"] + v["bv"])[:, 0]
    probs = masked_softmax(logits, mask)
    if cache:
        return probs, value, (x, h, trunk_cache)
    return probs, value


def backward_policy_value(pv: ParamVector, cache, dlogits: np.ndarray,
                          dvalue: np.ndarray) -> ParamVector:
    """Gradient given upstream grads on the raw logits and the value.

    Losses differentiate through the masked softmax analytically and hand
    the logit-space gradient here; the head itself is plain linear algebra.
    """
    x, h, trunk_cache = cache
    if dlogits.shape != (x.shape[0], pv.spec.n_actions):
        raise ShapeMismatch(f"upstream logit gradient shape {dlogits.shape}")
    if dvalue.shape != (x.shape[0],):
        raise ShapeMismatch(f"upstream value gradient shape {dvalue.shape}")
    grad = ParamVector(pv.spec, np.zeros_like(pv.data))
    g = grad.views
    v = pv.views
    dv = dvalue[:, None]
    g["wp"] += h.T @ dlogits
    g["bp"] += dlogits.sum(axis=0)
    g["wv"] += h.T @ dv
    g["bv"] += dv.sum(axis=0)
    dh = dlogits @ v["wp"].T + dv @ v["wv"].T
    _trunk_backward(pv, trunk_cache, dh, grad)
    return grad


# --- optimizer ------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)


def adam_init(spec: NetSpec, lr: float = 1e-4) -> AdamState:
    n = param_count(spec)
    return AdamState(lr=lr, m=np.zeros(n), v=np.zeros(n))


def optimize_step(pv: ParamVector, grad: ParamVector,
                  state: AdamState) -> tuple[ParamVector, AdamState]:
    """One in-place Adam update; rejects non-finite gradients untouched."""
    g = grad.data
    if g.shape != pv.data.shape:
        raise ShapeMismatch("gradient length does not match parameters")
    if not np.isfinite(g).all():
        raise GradientError("non-finite gradient rejected")
    state.step += 1
    state.m += (1.0 - state.beta1) * (g - state.m)
    state.v += (1.0 - state.beta2) * (g * g - state.v)
    mhat = state.m / (1.0 - state.beta1 ** state.step)
    vhat = state.v / (1.0 - state.beta2 ** state.step)
    pv.data -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return pv, state


# --- checkpoints ------------------------------------------------------------

def params_to_bytes(pv: ParamVector) -> bytes:
    spec = pv.spec
    doc = json.dumps({
        "input_dim": spec.input_dim,
        "hidden": list(spec.hidden),
        "head": spec.head,
        "n_actions": spec.n_actions,
    }).encode()
    raw = np.ascontiguousarray(pv.data, dtype="<f8").tobytes()
    return (CHECKPOINT_MAGIC + struct.pack("<B", CHECKPOINT_VERSION)
            + struct.pack("<I", len(doc)) + doc + raw)


def params_from_bytes(blob: bytes) -> ParamVector:
    if blob[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not a parameter checkpoint (bad magic)")
    off = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<B", blob, off)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off += 1
    (doc_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    doc = json.loads(blob[off:off + doc_len])
    off += doc_len
    spec = NetSpec(input_dim=doc["input_dim"], hidden=tuple(doc["hidden"]),
                   head=doc["head"], n_actions=doc["n_actions"])
    data = np.frombuffer(blob[off:], dtype="<f8").astype(np.float64)
    if data.shape[0] != param_count(spec):
        raise ValueError("checkpoint length does not match manifest")
    if not np.isfinite(data).all():
        raise ValueError("checkpoint contains non-finite values")
    return ParamVector(spec, data)


def save_params(pv: ParamVector, path) -> None:
    with open(path, "wb") as f:
        f.write(params_to_bytes(pv))


def load_params(path) -> ParamVector:
    with open(path, "rb") as f:
        return params_from_bytes(f.read())


# --- gradient audit helper ---------------------------------------------------

def finite_difference(f, theta: np.ndarray, indices, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of scalar f(theta) at the given coordinates."""
    out = np.zeros(len(indices))
    for k, i in enumerate(indices):
        orig = theta[i]
        theta[i] = orig + h
        plus = f(theta)
        theta[i] = orig - h
        minus = f(theta)
        theta[i] = orig
        out[k] = (plus - minus) / (2.0 * h)
    return out
