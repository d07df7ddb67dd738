"""PPO with clipped surrogate, truncated GAE and masked categorical policy.

Segments are fixed-length slices of experience cut regardless of episode
boundaries; the advantage estimator bootstraps across the cut from the value
net.  Advantages are computed once per update call and normalized over the
whole update batch, then reused across the clipped-surrogate epochs.
"""
from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field

import numpy as np

from .net import (
    NetSpec,
    ParamVector,
    adam_init,
    backward_policy_value,
    forward_policy_value,
    init_params,
    optimize_step,
)

ADV_NORM_EPS = 1e-8


@dataclass
class TrajectorySegment:
    feats: np.ndarray        # (T, F)
    actions: np.ndarray      # (T,) int
    logps: np.ndarray        # (T,) behavior log-probs
    values: np.ndarray       # (T,) behavior value estimates
    rewards: np.ndarray      # (T,)
    masks: np.ndarray        # (T, A) bool
    dones: np.ndarray        # (T,) bool
    bootstrap: float = 0.0   # V(s_T); must be 0 when dones[-1]

    def __post_init__(self):
        t = len(self.actions)
        if not (len(self.feats) == len(self.logps) == len(self.values)
                == len(self.rewards) == len(self.masks) == len(self.dones) == t):
            raise ValueError("segment arrays disagree on length")
        if self.dones[-1] and self.bootstrap != 0.0:
            raise ValueError("terminal segment must bootstrap from 0")

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.995
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    segment_len: int = 128
    lr: float = 1e-4

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma and lambda must lie in [0, 1]")
        if self.clip_eps <= 0.0:
            raise ValueError("clip epsilon must be positive")


def gae(seg: TrajectorySegment, cfg: PpoConfig) -> tuple[np.ndarray, np.ndarray]:
    """Truncated generalized advantage estimation over one segment."""
    t_len = len(seg)
    adv = np.zeros(t_len)
    next_value = seg.bootstrap
    next_adv = 0.0
    for t in reversed(range(t_len)):
        live = 1.0 - float(seg.dones[t])
        delta = seg.rewards[t] + cfg.gamma * next_value * live - seg.values[t]
        next_adv = delta + cfg.gamma * cfg.lam * live * next_adv
        adv[t] = next_adv
        next_value = seg.values[t]
    returns = adv + seg.values
    return adv, returns


def clip_surrogate(rho: np.ndarray, adv: np.ndarray, eps: float) -> np.ndarray:
    """Per-sample clipped objective min(rho*A, clip(rho)*A), to be maximized."""
    return np.minimum(rho * adv, np.clip(rho, 1.0 - eps, 1.0 + eps) * adv)


def entropy_of(probs: np.ndarray) -> np.ndarray:
    """Row entropies; masked-out zero probabilities contribute nothing."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1)


@dataclass
class MiniBatch:
    feats: np.ndarray
    actions: np.ndarray
    old_logps: np.ndarray
    masks: np.ndarray
    adv: np.ndarray          # already normalized
    returns: np.ndarray


def ppo_loss(pv: ParamVector, batch: MiniBatch, cfg: PpoConfig):
    """(loss, stats, gradient) for one minibatch.

    The gradient differentiates the masked softmax analytically: the
    surrogate routes through d rho / d logit = rho * (onehot - probs), the
    entropy term through dH / d logit = -p (log p + H).
    """
    n = len(batch.actions)
    rows = np.arange(n)
    probs, value, cache = forward_policy_value(pv, batch.feats, batch.masks,
                                               cache=True)
    p_a = probs[rows, batch.actions]
    if (p_a == 0.0).any():
        raise ValueError("behavior action is masked out under the stored mask")
    logp = np.log(p_a)
    rho = np.exp(logp - batch.old_logps)

    surr = clip_surrogate(rho, batch.adv, cfg.clip_eps)
    ent = entropy_of(probs)
    verr = value - batch.returns
    surrogate_loss = -surr.mean()
    value_loss = float((verr ** 2).mean())
    entropy_mean = float(ent.mean())
    loss = surrogate_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_mean

    # branch actually selected by the min (clip is identity inside the band)
    active = np.where(batch.adv >= 0.0, rho <= 1.0 + cfg.clip_eps,
                      rho >= 1.0 - cfg.clip_eps)
    dsurr_drho = np.where(active, batch.adv, 0.0)
    # d(-mean surr)/dlogit_j = -(1/n) dsurr/drho * rho * (onehot_a - p)_j
    coef = -(dsurr_drho * rho) / n
    dlogits = coef[:, None] * (-probs)
    dlogits[rows, batch.actions] += coef
    # entropy bonus: d(-c_e mean H)/dlogit = (c_e/n) * p * (log p + H)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp_full = np.where(probs > 0.0, np.log(probs), 0.0)
    dlogits += (cfg.entropy_coef / n) * probs * (logp_full + ent[:, None])
    dvalue = (2.0 * cfg.value_coef / n) * verr

    grad = backward_policy_value(pv, cache, dlogits, dvalue)
    stats = {
        "surrogate": float(surrogate_loss),
        "value_loss": value_loss,
        "entropy": entropy_mean,
        "mean_ratio": float(rho.mean()),
        "clip_fraction": float((np.abs(rho - 1.0) > cfg.clip_eps).mean()),
    }
    return float(loss), stats, grad


def normalized_advantages(segments: list[TrajectorySegment],
                          cfg: PpoConfig) -> tuple[np.ndarray, np.ndarray]:
    """GAE over every segment, then mean-0 std-1 over the whole batch."""
    advs, rets = [], []
    for seg in segments:
        a, r = gae(seg, cfg)
        advs.append(a)
        rets.append(r)
    adv = np.concatenate(advs)
    adv = (adv - adv.mean()) / (adv.std() + ADV_NORM_EPS)
    return adv, np.concatenate(rets)


class SegmentBuilder:
    """Accumulates steps and emits fixed-length segments across episodes."""

    def __init__(self, segment_len: int = 128):
        self.segment_len = segment_len
        self._rows = []

    def add(self, feat, action, logp, value, reward, mask, done) -> None:
        self._rows.append((feat, action, logp, value, reward, mask, done))

    @property
    def full(self) -> bool:
        return len(self._rows) >= self.segment_len

    def take(self, bootstrap: float) -> TrajectorySegment:
        rows, self._rows = self._rows[:self.segment_len], self._rows[self.segment_len:]
        f, a, lp, v, r, m, d = zip(*rows)
        if d[-1]:
            bootstrap = 0.0
        return TrajectorySegment(
            feats=np.stack(f), actions=np.array(a, dtype=int),
            logps=np.array(lp), values=np.array(v), rewards=np.array(r),
            masks=np.stack(m), dones=np.array(d, dtype=bool),
            bootstrap=float(bootstrap))


class PpoLearner:
    """Policy/value parameters plus the clipped-surrogate update loop."""

    def __init__(self, spec: NetSpec, cfg: PpoConfig | None = None,
                 seed: int = 0, metrics_path=None):
        if spec.head != "policy_value":
            raise ValueError("PPO needs a policy_value head")
        self.cfg = cfg if cfg is not None else PpoConfig()
        self.params = init_params(spec, seed=seed)
        self.opt = adam_init(spec, lr=self.cfg.lr)
        self.updates = 0
        self._metrics_path = metrics_path

    def act(self, feats: np.ndarray, mask: np.ndarray,
            rng: random.Random) -> tuple[int, float, float]:
        """Sample an action; returns (action, log-prob, value estimate)."""
        probs, value = forward_policy_value(self.params, feats, mask)
        p = probs[0]
        avail = np.flatnonzero(mask)
        cum = np.cumsum(p[avail])
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        a = int(avail[min(i, avail.size - 1)])
        return a, float(np.log(p[a])), float(value[0])

    def greedy(self, feats: np.ndarray, mask: np.ndarray) -> int:
        probs, _ = forward_policy_value(self.params, feats, mask)
        return int(np.argmax(probs[0]))

    def value_of(self, feats: np.ndarray, mask: np.ndarray) -> float:
        _, value = forward_policy_value(self.params, feats, mask)
        return float(value[0])

    def update(self, segments: list[TrajectorySegment]) -> dict:
        """Epochs of minibatch clipped-surrogate steps; advantages fixed."""
        if not segments:
            raise ValueError("update needs at least one segment")
        cfg = self.cfg
        adv, returns = normalized_advantages(segments, cfg)
        feats = np.concatenate([s.feats for s in segments])
        actions = np.concatenate([s.actions for s in segments])
        old_logps = np.concatenate([s.logps for s in segments])
        masks = np.concatenate([s.masks for s in segments])
        n = len(actions)
        order_rng = random.Random(self.updates * 9973 + 17)
        first_ratio = None
        agg = {"surrogate": 0.0, "value_loss": 0.0, "entropy": 0.0,
               "mean_ratio": 0.0, "clip_fraction": 0.0}
        steps = 0
        for _ in range(cfg.epochs):
            order = list(range(n))
            order_rng.shuffle(order)
            for lo in range(0, n, cfg.minibatch):
                idx = order[lo:lo + cfg.minibatch]
                batch = MiniBatch(feats[idx], actions[idx], old_logps[idx],
                                  masks[idx], adv[idx], returns[idx])
                loss, stats, grad = ppo_loss(self.params, batch, cfg)
                optimize_step(self.params, grad, self.opt)
                if first_ratio is None:
                    first_ratio = stats["mean_ratio"]
                for k in agg:
                    agg[k] += stats[k]
                steps += 1
        self.updates += 1
        out = {k: v / steps for k, v in agg.items()}
        out["first_ratio"] = first_ratio
        out["update"] = self.updates
        if self._metrics_path is not None:
            self._log(out)
        return out

    def _log(self, stats: dict) -> None:
        with open(self._metrics_path, "a", newline="") as f:
            w = csv.writer(f)
            if f.tell() == 0:
                w.writerow(["update", "surrogate", "value_loss", "entropy",
                            "mean_ratio", "clip_fraction"])
            w.writerow([stats["update"], f"{stats['surrogate']:.6f}",
                        f"{stats['value_loss']:.6f}", f"{stats['entropy']:.6f}",
                        f"{stats['mean_ratio']:.6f}",
                        f"{stats['clip_fraction']:.6f}"])
