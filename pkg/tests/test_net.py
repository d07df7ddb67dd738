"""Approximator: dueling identities, masked softmax, gradient audit, Adam."""
from __future__ import annotations

import math

import numpy as np
import pytest

from minizerg.net import (
    AdamState,
    EmptyMask,
    GradientError,
    NetSpec,
    ParamVector,
    ShapeMismatch,
    adam_init,
    backward_policy_value,
    backward_q,
    finite_difference,
    forward_policy_value,
    forward_q,
    init_params,
    load_params,
    manifest,
    masked_softmax,
    optimize_step,
    param_count,
    params_from_bytes,
    params_to_bytes,
    save_params,
)

SMALL_Q = NetSpec(input_dim=12, hidden=(16, 8), head="dueling_q", n_actions=7)
SMALL_PV = NetSpec(input_dim=12, hidden=(16, 8), head="policy_value", n_actions=7)


def test_manifest_and_param_count():
    m = dict(manifest(SMALL_Q))
    assert m["w0"] == (12, 16) and m["b0"] == (16,)
    assert m["w1"] == (16, 8) and m["b1"] == (8,)
    assert m["wv"] == (8, 1) and m["wa"] == (8, 7)
    assert param_count(SMALL_Q) == 12 * 16 + 16 + 16 * 8 + 8 + 8 + 1 + 8 * 7 + 7
    default = NetSpec(input_dim=507)
    assert dict(manifest(default))["w0"] == (507, 256)


def test_init_is_seeded_and_finite():
    a = init_params(SMALL_Q, seed=5)
    b = init_params(SMALL_Q, seed=5)
    c = init_params(SMALL_Q, seed=6)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    assert np.isfinite(a.data).all()
    assert a.views["b0"].sum() == 0.0   # biases start at zero


def test_views_share_memory_with_flat_vector():
    pv = init_params(SMALL_Q, seed=1)
    pv.data[:] = 0.0
    assert pv.views["wa"].sum() == 0.0
    pv.views["wa"][0, 0] = 3.0
    assert 3.0 in pv.data


# --- dueling head ----------------------------------------------------------

def test_dueling_mean_centering_identity():
    pv = init_params(SMALL_Q, seed=2)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 12))
    q = forward_q(pv, x)
    # per sample, mean_a (Q - V) = 0: recover V via the value branch
    h, _ = np.maximum(np.maximum(x @ pv.views["w0"] + pv.views["b0"], 0)
                      @ pv.views["w1"] + pv.views["b1"], 0), None
    v = h @ pv.views["wv"] + pv.views["bv"]
    assert np.allclose((q - v).mean(axis=1), 0.0, atol=1e-9)


def test_equal_advantages_collapse_to_value():
    pv = init_params(SMALL_Q, seed=3)
    pv.views["wa"][:] = 0.0
    pv.views["ba"][:] = 4.25     # advantage head outputs the constant 4.25
    x = np.random.default_rng(1).normal(size=(3, 12))
    q = forward_q(pv, x)
    assert np.allclose(q, q[:, :1])   # all actions equal V


def test_zero_parameters_give_flat_q():
    pv = ParamVector(SMALL_Q, np.zeros(param_count(SMALL_Q)))
    q = forward_q(pv, np.ones((2, 12)))
    assert np.array_equal(q, np.zeros((2, 7)))


def test_dimension_mismatch_rejected():
    pv = init_params(SMALL_Q, seed=0)
    with pytest.raises(ShapeMismatch):
        forward_q(pv, np.ones((2, 13)))
    with pytest.raises(ShapeMismatch):
        forward_policy_value(pv, np.ones((2, 12)), np.ones(7, dtype=bool))


# --- masked softmax ----------------------------------------------------------

def test_masked_softmax_uniform_and_single():
    logits = np.zeros((1, 10))
    mask = np.zeros((1, 10), dtype=bool)
    mask[0, [1, 3, 5, 7, 9]] = True
    p = masked_softmax(logits, mask)
    assert np.allclose(p[0, [1, 3, 5, 7, 9]], 0.2)
    assert (p[0, [0, 2, 4, 6, 8]] == 0.0).all()
    only = np.zeros((1, 10), dtype=bool)
    only[0, 4] = True
    assert masked_softmax(logits, only)[0, 4] == 1.0


def test_masked_softmax_closed_form():
    logits = np.full((1, 6), 50.0)
    logits[0, 0] = 1.0
    logits[0, 1] = 2.0
    mask = np.zeros((1, 6), dtype=bool)
    mask[0, :2] = True
    p = masked_softmax(logits, mask)
    e = math.e
    assert np.allclose(p[0, :2], [1 / (1 + e), e / (1 + e)])
    assert p[0, 2:].sum() == 0.0


def test_policy_head_normalization_and_zeroing():
    pv = init_params(SMALL_PV, seed=4)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(8, 12))
    mask = rng.random((8, 7)) < 0.5
    mask[:, 0] = True   # keep every row nonempty
    probs, value = forward_policy_value(pv, x, mask)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert (probs[~mask] == 0.0).all()
    assert value.shape == (8,)


def test_empty_mask_rejected():
    pv = init_params(SMALL_PV, seed=4)
    mask = np.ones((2, 7), dtype=bool)
    mask[1, :] = False
    with pytest.raises(EmptyMask):
        forward_policy_value(pv, np.ones((2, 12)), mask)


# --- gradient audit -----------------------------------------------------------

def _margin_ok(pv, x):
    # reject nets whose ReLU pre-activations sit near the kink, where the
    # finite-difference oracle itself is unreliable
    h = x
    for i in range(len(pv.spec.hidden)):
        z = h @ pv.views[f"w{i}"] + pv.views[f"b{i}"]
        if np.abs(z).min() < 5e-3:
            return False
        h = np.maximum(z, 0.0)
    return True


def _ten_clean_nets(spec, make_loss):
    """Yield (pv, f, analytic_grad) for ten kink-free random nets."""
    produced = 0
    seed = 0
    while produced < 10:
        seed += 1
        pv = init_params(spec, seed=seed)
        rng = np.random.default_rng(seed + 1000)
        x = rng.normal(size=(3, spec.input_dim))
        if not _margin_ok(pv, x):
            continue
        f, grad = make_loss(pv, x, rng)
        yield pv, f, grad
        produced += 1


def test_q_gradient_matches_finite_differences():
    def make_loss(pv, x, rng):
        c = rng.normal(size=(3, pv.spec.n_actions))

        def f(theta):
            return float((forward_q(ParamVector(pv.spec, theta), x) * c).sum())

        q, cache = forward_q(pv, x, cache=True)
        grad = backward_q(pv, cache, c)
        return f, grad

    worst = 0.0
    for pv, f, grad in _ten_clean_nets(SMALL_Q, make_loss):
        idx = range(param_count(SMALL_Q))
        fd = finite_difference(f, pv.data, list(idx), h=1e-4)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad.data)), 1e-6)
        worst = max(worst, float(np.max(np.abs(fd - grad.data) / denom)))
    assert worst < 1e-4, worst


def test_policy_value_gradient_matches_finite_differences():
    def make_loss(pv, x, rng):
        mask = np.ones((3, pv.spec.n_actions), dtype=bool)
        mask[:, 5] = False
        c = rng.normal(size=(3, pv.spec.n_actions))
        cv = rng.normal(size=3)

        def f(theta):
            p, v = forward_policy_value(ParamVector(pv.spec, theta), x, mask)
            return float((p * c).sum() + (v * cv).sum())

        probs, value, cache = forward_policy_value(pv, x, mask, cache=True)
        # softmax jacobian: d(sum c.p)/dz_j = p_j (c_j - sum_k c_k p_k)
        dlogits = probs * (c - (c * probs).sum(axis=1, keepdims=True))
        grad = backward_policy_value(pv, cache, dlogits, cv)
        return f, grad

    worst = 0.0
    for pv, f, grad in _ten_clean_nets(SMALL_PV, make_loss):
        idx = range(param_count(SMALL_PV))
        fd = finite_difference(f, pv.data, list(idx), h=1e-4)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad.data)), 1e-6)
        worst = max(worst, float(np.max(np.abs(fd - grad.data) / denom)))
    assert worst < 1e-4, worst


def test_zero_upstream_gradient_is_zero():
    pv = init_params(SMALL_Q, seed=9)
    x = np.random.default_rng(3).normal(size=(4, 12))
    _, cache = forward_q(pv, x, cache=True)
    grad = backward_q(pv, cache, np.zeros((4, 7)))
    assert not grad.data.any()


def test_advantage_gradient_rows_are_mean_centered():
    # the dueling combine routes only the mean-centered part of dQ into the
    # advantage branch, so the advantage bias gradient sums to zero
    pv = init_params(SMALL_Q, seed=10)
    x = np.random.default_rng(4).normal(size=(1, 12))
    _, cache = forward_q(pv, x, cache=True)
    dq = np.random.default_rng(5).normal(size=(1, 7))
    grad = backward_q(pv, cache, dq)
    assert abs(grad.views["ba"].sum()) < 1e-12
    assert abs(grad.views["bv"].sum() - dq.sum()) < 1e-12


# --- optimizer ----------------------------------------------------------------

def test_adam_zero_gradient_is_identity():
    pv = init_params(SMALL_Q, seed=11)
    before = pv.data.copy()
    state = adam_init(SMALL_Q)
    zero = ParamVector(SMALL_Q, np.zeros_like(pv.data))
    optimize_step(pv, zero, state)
    assert np.array_equal(pv.data, before)


def test_adam_descends_a_quadratic():
    spec = NetSpec(input_dim=1, hidden=(1,), head="dueling_q", n_actions=1)
    n = param_count(spec)
    theta = np.zeros(n)
    theta[0] = 1.0
    pv = ParamVector(spec, theta)
    state = AdamState(lr=1e-2, m=np.zeros(n), v=np.zeros(n))
    history = []
    for _ in range(200):
        g = np.zeros(n)
        g[0] = 2.0 * pv.data[0]        # d/dθ of θ²
        optimize_step(pv, ParamVector(spec, g), state)
        history.append(abs(pv.data[0]))
    assert all(b < a for a, b in zip(history, history[1:]))


def test_adam_rejects_non_finite_gradient():
    pv = init_params(SMALL_Q, seed=12)
    before = pv.data.copy()
    state = adam_init(SMALL_Q)
    bad = ParamVector(SMALL_Q, np.zeros_like(pv.data))
    bad.data[3] = np.nan
    with pytest.raises(GradientError):
        optimize_step(pv, bad, state)
    assert np.array_equal(pv.data, before)
    assert state.step == 0


def test_adam_is_deterministic_given_state():
    a = init_params(SMALL_Q, seed=13)
    b = init_params(SMALL_Q, seed=13)
    sa, sb = adam_init(SMALL_Q), adam_init(SMALL_Q)
    g = ParamVector(SMALL_Q, np.linspace(-1, 1, param_count(SMALL_Q)))
    for _ in range(5):
        optimize_step(a, g, sa)
        optimize_step(b, g, sb)
    assert np.array_equal(a.data, b.data)


# --- checkpoints ----------------------------------------------------------------

def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    pv = init_params(NetSpec(input_dim=507), seed=14)
    path = tmp_path / "params.ckpt"
    save_params(pv, path)
    back = load_params(path)
    assert back.spec == pv.spec
    assert np.array_equal(back.data, pv.data)
    assert back.data.tobytes() == pv.data.tobytes()


def test_checkpoint_rejects_garbage():
    pv = init_params(SMALL_Q, seed=15)
    blob = params_to_bytes(pv)
    with pytest.raises(ValueError, match="magic"):
        params_from_bytes(b"XX" + blob[2:])
    with pytest.raises(ValueError, match="version"):
        params_from_bytes(blob[:6] + b"\x09" + blob[7:])
    with pytest.raises(ValueError, match="length"):
        params_from_bytes(blob[:-16])
