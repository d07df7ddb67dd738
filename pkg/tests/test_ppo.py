"""Tests for truncated GAE, the clipped surrogate and the PPO update loop."""
import random

import numpy as np
import pytest

from minizerg.net import NetSpec, ParamVector, finite_difference, param_count
from minizerg.ppo import (
    MiniBatch,
    PpoConfig,
    PpoLearner,
    SegmentBuilder,
    TrajectorySegment,
    clip_surrogate,
    entropy_of,
    gae,
    normalized_advantages,
    ppo_loss,
)

BANDIT = NetSpec(1, (16, 16), "policy_value", 2)


def random_segment(rng, t_len, terminal_tail=False):
    dones = rng.random(t_len) < 0.2
    if terminal_tail:
        dones[-1] = True
    bootstrap = 0.0 if dones[-1] else float(rng.normal())
    return TrajectorySegment(
        feats=rng.normal(size=(t_len, 1)),
        actions=np.zeros(t_len, dtype=int),
        logps=np.zeros(t_len),
        values=rng.normal(size=t_len),
        rewards=rng.normal(size=t_len),
        masks=np.ones((t_len, 2), dtype=bool),
        dones=dones,
        bootstrap=bootstrap,
    )


def brute_force_gae(seg, cfg):
    """Advantage as the explicit discounted sum of one-step TD errors."""
    t_len = len(seg)
    values = np.append(seg.values, seg.bootstrap)
    deltas = np.array([
        seg.rewards[t]
        + cfg.gamma * values[t + 1] * (1.0 - float(seg.dones[t]))
        - values[t]
        for t in range(t_len)
    ])
    adv = np.zeros(t_len)
    for t in range(t_len):
        acc, w = 0.0, 1.0
        for u in range(t, t_len):
            acc += w * deltas[u]
            if seg.dones[u]:
                break
            w *= cfg.gamma * cfg.lam
        adv[t] = acc
    return adv


# --- GAE ------------------------------------------------------------------

def test_gae_matches_brute_force_double_sum():
    rng = np.random.default_rng(0)
    cfg = PpoConfig()
    for i in range(1000):
        seg = random_segment(rng, t_len=int(rng.integers(1, 13)))
        adv, ret = gae(seg, cfg)
        expect = brute_force_gae(seg, cfg)
        assert np.abs(adv - expect).max() < 1e-10
        assert np.abs(ret - (expect + seg.values)).max() < 1e-10


def test_gae_lambda_zero_is_one_step_td_error():
    rng = np.random.default_rng(1)
    cfg = PpoConfig(lam=0.0)
    seg = random_segment(rng, t_len=10)
    adv, _ = gae(seg, cfg)
    values = np.append(seg.values, seg.bootstrap)
    deltas = seg.rewards + cfg.gamma * values[1:] * (1.0 - seg.dones) - values[:10]
    assert np.abs(adv - deltas).max() < 1e-12


def test_gae_gamma_lambda_one_recovers_monte_carlo():
    # zero values and a terminal tail turn the estimator into reward-to-go
    cfg = PpoConfig(gamma=1.0, lam=1.0)
    rewards = np.array([1.0, -2.0, 3.0, 0.5])
    seg = TrajectorySegment(
        feats=np.zeros((4, 1)), actions=np.zeros(4, dtype=int),
        logps=np.zeros(4), values=np.zeros(4), rewards=rewards,
        masks=np.ones((4, 2), dtype=bool),
        dones=np.array([False, False, False, True]), bootstrap=0.0)
    adv, ret = gae(seg, cfg)
    expect = np.array([rewards[t:].sum() for t in range(4)])
    assert np.abs(adv - expect).max() < 1e-12
    assert np.abs(ret - expect).max() < 1e-12


def test_gae_hand_unrolled_example():
    cfg = PpoConfig(gamma=1.0, lam=1.0)
    seg = TrajectorySegment(
        feats=np.zeros((2, 1)), actions=np.zeros(2, dtype=int),
        logps=np.zeros(2), values=np.array([0.5, 0.5]),
        rewards=np.array([0.0, 1.0]), masks=np.ones((2, 2), dtype=bool),
        dones=np.array([False, True]), bootstrap=0.0)
    adv, ret = gae(seg, cfg)
    # deltas are [0 + 0.5 - 0.5, 1 + 0 - 0.5] = [0, 0.5]
    assert adv == pytest.approx([0.5, 0.5])
    assert ret == pytest.approx([1.0, 1.0])


def test_terminal_segment_with_nonzero_bootstrap_rejected():
    with pytest.raises(ValueError):
        TrajectorySegment(
            feats=np.zeros((1, 1)), actions=np.zeros(1, dtype=int),
            logps=np.zeros(1), values=np.zeros(1), rewards=np.zeros(1),
            masks=np.ones((1, 2), dtype=bool),
            dones=np.array([True]), bootstrap=0.7)


def test_normalized_advantages_have_zero_mean_unit_std():
    rng = np.random.default_rng(2)
    segs = [random_segment(rng, 32) for _ in range(4)]
    adv, ret = normalized_advantages(segs, PpoConfig())
    assert adv.shape == (128,) and ret.shape == (128,)
    assert abs(adv.mean()) < 1e-12
    assert adv.std() == pytest.approx(1.0, abs=1e-6)


# --- clipped surrogate ------------------------------------------------------

def test_clip_surrogate_branch_selection():
    eps = 0.2
    # positive advantage, ratio above the band: clipped at 1.2
    assert clip_surrogate(np.array([1.5]), np.array([2.0]), eps) == pytest.approx([2.4])
    # negative advantage, ratio below the band: min picks the clipped branch
    assert clip_surrogate(np.array([0.5]), np.array([-1.0]), eps) == pytest.approx([-0.8])
    # inside the band both branches agree
    assert clip_surrogate(np.array([1.1]), np.array([3.0]), eps) == pytest.approx([3.3])
    assert clip_surrogate(np.array([1.0]), np.array([-2.0]), eps) == pytest.approx([-2.0])


def _policy_batch(learner, rng, n=32, n_actions=2, masked_out=None):
    """Collect a batch by acting with the learner's own parameters."""
    feats, actions, logps, masks = [], [], [], []
    for _ in range(n):
        f = np.array([1.0])
        mask = np.ones(n_actions, dtype=bool)
        if masked_out is not None:
            mask[masked_out] = False
        a, lp, _v = learner.act(f, mask, rng)
        feats.append(f)
        actions.append(a)
        logps.append(lp)
        masks.append(mask)
    return (np.stack(feats), np.array(actions, dtype=int), np.array(logps),
            np.stack(masks))


def test_ratio_one_surrogate_is_negative_mean_advantage():
    learner = PpoLearner(BANDIT, seed=3)
    rng = random.Random(7)
    feats, actions, logps, masks = _policy_batch(learner, rng)
    adv = np.random.default_rng(4).normal(size=32)
    batch = MiniBatch(feats, actions, logps, masks, adv, np.zeros(32))
    loss, stats, _grad = ppo_loss(learner.params, batch, learner.cfg)
    assert stats["mean_ratio"] == pytest.approx(1.0, abs=1e-12)
    assert stats["clip_fraction"] == 0.0
    assert stats["surrogate"] == pytest.approx(-adv.mean(), abs=1e-12)


def test_loss_rejects_masked_out_behavior_action():
    learner = PpoLearner(BANDIT, seed=5)
    rng = random.Random(8)
    feats, actions, logps, masks = _policy_batch(learner, rng, n=8)
    masks[3, actions[3]] = False
    batch = MiniBatch(feats, actions, logps, masks, np.ones(8), np.zeros(8))
    with pytest.raises(ValueError):
        ppo_loss(learner.params, batch, learner.cfg)


def test_entropy_bounded_by_log_available_iff_uniform():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n_act = int(rng.integers(2, 9))
        k = int(rng.integers(1, n_act + 1))
        mask = np.zeros(n_act, dtype=bool)
        mask[rng.permutation(n_act)[:k]] = True
        logits = rng.normal(size=n_act) * 3.0
        z = np.where(mask, logits, -np.inf)
        e = np.exp(z - z.max())
        p = (e / e.sum())[None, :]
        h = entropy_of(p)[0]
        assert h <= np.log(k) + 1e-12
        uniform = np.where(mask, 1.0 / k, 0.0)[None, :]
        assert entropy_of(uniform)[0] == pytest.approx(np.log(k), abs=1e-12)
        if np.ptp(logits[mask]) > 1e-3:
            assert h < np.log(k) - 1e-9 or k == 1


# --- gradient audit ---------------------------------------------------------

def _margin_ok(pv, x):
    h = x
    for i in range(len(pv.spec.hidden)):
        z = h @ pv.views[f"w{i}"] + pv.views[f"b{i}"]
        if np.abs(z).min() < 5e-3:
            return False
        h = np.maximum(z, 0.0)
    return True


def test_ppo_loss_gradient_matches_finite_differences():
    from minizerg.net import init_params

    spec = NetSpec(5, (12, 8), "policy_value", 4)
    cfg = PpoConfig()
    produced, seed, worst = 0, 0, 0.0
    nprng = np.random.default_rng(99)
    while produced < 10:
        seed += 1
        pv = init_params(spec, seed=seed)
        x = nprng.normal(size=(6, 5))
        if not _margin_ok(pv, x):
            continue
        produced += 1
        mask = np.ones((6, 4), dtype=bool)
        mask[nprng.integers(0, 6), nprng.integers(0, 4)] = False
        actions = np.array([int(nprng.choice(np.flatnonzero(m))) for m in mask])
        from minizerg.net import forward_policy_value
        probs, _v = forward_policy_value(pv, x, mask)
        rows = np.arange(6)
        # spread ratios off the clip boundaries but keep both signs active
        old_logps = np.log(probs[rows, actions]) - np.log(1.1)
        adv = nprng.normal(size=6)
        batch = MiniBatch(x, actions, old_logps, mask, adv,
                          nprng.normal(size=6))

        def f(theta):
            loss, _s, _g = ppo_loss(ParamVector(spec, theta), batch, cfg)
            return loss

        _loss, _stats, grad = ppo_loss(pv, batch, cfg)
        fd = finite_difference(f, pv.data, list(range(param_count(spec))),
                               h=1e-4)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad.data)), 1e-6)
        worst = max(worst, float(np.max(np.abs(fd - grad.data) / denom)))
    assert worst < 1e-4, worst


# --- update loop -------------------------------------------------------------

def one_step_bandit_segment(learner, rng, rewards=(1.0, -1.0), t_len=128,
                            masked_out=None):
    builder = SegmentBuilder(t_len)
    f = np.array([1.0])
    mask = np.ones(2, dtype=bool)
    if masked_out is not None:
        mask = np.ones(3, dtype=bool)
        mask[masked_out] = False
    while not builder.full:
        a, lp, v = learner.act(f, mask, rng)
        builder.add(f, a, lp, v, rewards[a], mask, True)
    return builder.take(0.0)


def test_update_first_minibatch_ratio_is_one():
    learner = PpoLearner(BANDIT, seed=9)
    rng = random.Random(11)
    seg = one_step_bandit_segment(learner, rng)
    stats = learner.update([seg])
    assert stats["first_ratio"] == pytest.approx(1.0, abs=1e-12)
    assert stats["update"] == 1


def test_two_armed_bandit_converges_within_200_updates():
    learner = PpoLearner(BANDIT, cfg=PpoConfig(lr=3e-3), seed=10)
    rng = random.Random(12)
    f = np.array([1.0])
    mask = np.ones(2, dtype=bool)
    for update in range(200):
        seg = one_step_bandit_segment(learner, rng)
        learner.update([seg])
        from minizerg.net import forward_policy_value
        probs, _ = forward_policy_value(learner.params, f, mask)
        if probs[0, 0] >= 0.95:
            break
    else:
        pytest.fail(f"greedy arm probability stuck at {probs[0, 0]:.3f}")
    assert learner.greedy(f, mask) == 0


def test_equal_rewards_move_policy_only_toward_uniform():
    # all advantages identical, so the normalized surrogate gradient is zero
    # and the entropy bonus is the only force on the logits
    learner = PpoLearner(BANDIT, cfg=PpoConfig(lr=3e-3), seed=13)
    rng = random.Random(14)
    f = np.array([1.0])
    mask = np.ones(2, dtype=bool)
    from minizerg.net import forward_policy_value
    before = forward_policy_value(learner.params, f, mask)[0][0, 0]
    for _ in range(20):
        seg = one_step_bandit_segment(learner, rng, rewards=(0.5, 0.5))
        learner.update([seg])
    after = forward_policy_value(learner.params, f, mask)[0][0, 0]
    assert abs(after - 0.5) <= abs(before - 0.5) + 1e-9


def test_masked_arm_probability_stays_exactly_zero():
    spec = NetSpec(1, (16, 16), "policy_value", 3)
    learner = PpoLearner(spec, cfg=PpoConfig(lr=3e-3), seed=15)
    rng = random.Random(16)
    mask = np.ones(3, dtype=bool)
    mask[2] = False
    for _ in range(5):
        seg = one_step_bandit_segment(learner, rng, rewards=(1.0, -1.0, 0.0),
                                      masked_out=2)
        learner.update([seg])
    from minizerg.net import forward_policy_value
    probs, _ = forward_policy_value(learner.params, np.array([1.0]), mask)
    assert probs[0, 2] == 0.0
    assert probs[0, :2].sum() == pytest.approx(1.0)


def test_update_requires_segments():
    learner = PpoLearner(BANDIT, seed=17)
    with pytest.raises(ValueError):
        learner.update([])


def test_segment_builder_carries_overflow_rows():
    builder = SegmentBuilder(4)
    for i in range(6):
        builder.add(np.array([float(i)]), 0, 0.0, 0.0, 1.0,
                    np.ones(2, dtype=bool), i == 5)
    assert builder.full
    seg = builder.take(0.25)
    assert len(seg) == 4
    assert seg.bootstrap == 0.25
    assert seg.feats[:, 0].tolist() == [0.0, 1.0, 2.0, 3.0]
    assert not builder.full
    builder.add(np.array([6.0]), 0, 0.0, 0.0, 1.0, np.ones(2, dtype=bool), False)
    builder.add(np.array([7.0]), 0, 0.0, 0.0, 1.0, np.ones(2, dtype=bool), False)
    seg2 = builder.take(0.5)
    assert seg2.feats[:, 0].tolist() == [4.0, 5.0, 6.0, 7.0]


def test_segment_builder_zeroes_bootstrap_on_terminal_tail():
    builder = SegmentBuilder(2)
    builder.add(np.array([0.0]), 0, 0.0, 0.0, 1.0, np.ones(2, dtype=bool), False)
    builder.add(np.array([1.0]), 0, 0.0, 0.0, 1.0, np.ones(2, dtype=bool), True)
    seg = builder.take(0.9)
    assert seg.bootstrap == 0.0


def test_metrics_csv_written(tmp_path):
    path = tmp_path / "ppo.csv"
    learner = PpoLearner(BANDIT, seed=18, metrics_path=path)
    rng = random.Random(19)
    learner.update([one_step_bandit_segment(learner, rng)])
    learner.update([one_step_bandit_segment(learner, rng)])
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",")[:3] == ["update", "surrogate", "value_loss"]
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "1"


def test_config_validation():
    with pytest.raises(ValueError):
        PpoConfig(gamma=1.5)
    with pytest.raises(ValueError):
        PpoConfig(lam=-0.1)
    with pytest.raises(ValueError):
        PpoConfig(clip_eps=0.0)
    with pytest.raises(ValueError):
        PpoLearner(NetSpec(4, (8,), "dueling_q", 3))
