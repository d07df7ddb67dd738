"""Dueling Double DQN with Mixture-of-Monte-Carlo update targets.

The update target mixes the discounted episode return into the bootstrapped
double-Q target: y = beta * G_mc + (1 - beta) * (r + gamma * Q_target(s',
a*)) with a* chosen by the online network under the next-state availability
mask.  Replay is a plain FIFO ring with uniform sampling; exploration is
linearly annealed epsilon-greedy over masked-in actions.
"""
from __future__ import annotations

import csv
import random
import threading
from dataclasses import dataclass, field

import numpy as np

from .net import (
    AdamState,
    NetSpec,
    ParamVector,
    adam_init,
    backward_q,
    forward_q,
    init_params,
    optimize_step,
)


@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool
    mask_next: np.ndarray
    mc_return: float = 0.0


@dataclass(frozen=True)
class DdqnConfig:
    gamma: float = 0.995
    beta_mmc: float = 0.1
    eps_start: float = 1.0
    eps_final: float = 0.05
    eps_decay_steps: int = 1_000_000
    target_sync: int = 5_000      # updates between target refreshes
    batch_size: int = 64
    capacity: int = 200_000
    lr: float = 1e-4

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.beta_mmc <= 1.0):
            raise ValueError("gamma and beta_mmc must lie in [0, 1]")


def epsilon(cfg: DdqnConfig, step: int) -> float:
    """Linear anneal from eps_start to eps_final over eps_decay_steps."""
    frac = min(max(step, 0) / cfg.eps_decay_steps, 1.0)
    if frac >= 1.0:
        return cfg.eps_final
    return cfg.eps_start + (cfg.eps_final - cfg.eps_start) * frac


def finish_episode(transitions: list[Transition], gamma: float) -> None:
    """Fill mc_return in place: G_t = r_t + gamma * G_{t+1}, terminal G = r."""
    g = 0.0
    for t in reversed(transitions):
        if t.done:
            g = t.r
        else:
            g = t.r + gamma * g
        t.mc_return = g


class ReplayMemory:
    """FIFO ring buffer with uniform sampling; push and sample serialized."""

    def __init__(self, capacity: int = 200_000, seed: int = 0):
        self.capacity = capacity
        self._buf: list[Transition] = []
        self._head = 0
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._buf)

    def push(self, t: Transition) -> None:
        with self._lock:
            if len(self._buf) < self.capacity:
                self._buf.append(t)
            else:
                self._buf[self._head] = t
                self._head = (self._head + 1) % self.capacity

    def extend(self, ts) -> None:
        for t in ts:
            self.push(t)

    def sample(self, k: int) -> list[Transition]:
        """Uniform sample with replacement."""
        with self._lock:
            if not self._buf:
                raise ValueError("replay memory is empty")
            return [self._buf[self._rng.randrange(len(self._buf))] for _ in range(k)]


def select_action(online: ParamVector, features: np.ndarray, mask: np.ndarray,
                  eps: float, rng: random.Random) -> int:
    """Epsilon-greedy over masked-in actions; greedy ties go to lowest index."""
    avail = np.flatnonzero(mask)
    if avail.size == 0:
        raise ValueError("action mask is empty")
    if rng.random() < eps:
        return int(avail[rng.randrange(avail.size)])
    q = forward_q(online, features)[0]
    masked = np.where(mask, q, -np.inf)
    return int(np.argmax(masked))       # argmax takes the first maximum


def q_target(t: Transition, online: ParamVector, target: ParamVector,
             cfg: DdqnConfig) -> float:
    """MMC target for one transition."""
    if t.done:
        boot = t.r
    else:
        if not np.asarray(t.mask_next).any():
            raise ValueError("non-terminal transition with empty next mask")
        q_online = forward_q(online, t.s_next)[0]
        a_star = int(np.argmax(np.where(t.mask_next, q_online, -np.inf)))
        q_eval = forward_q(target, t.s_next)[0]
        boot = t.r + cfg.gamma * float(q_eval[a_star])
    return cfg.beta_mmc * t.mc_return + (1.0 - cfg.beta_mmc) * boot


def q_targets(batch: list[Transition], online: ParamVector,
              target: ParamVector, cfg: DdqnConfig) -> np.ndarray:
    """Vectorized MMC targets for a batch."""
    n = len(batch)
    y = np.empty(n)
    live = [i for i, t in enumerate(batch) if not t.done]
    for i, t in enumerate(batch):
        if t.done:
            y[i] = t.r
    if live:
        s_next = np.stack([batch[i].s_next for i in live])
        masks = np.stack([batch[i].mask_next for i in live])
        if not masks.any(axis=1).all():
            raise ValueError("non-terminal transition with empty next mask")
        q_online = forward_q(online, s_next)
        a_star = np.argmax(np.where(masks, q_online, -np.inf), axis=1)
        q_eval = forward_q(target, s_next)
        for j, i in enumerate(live):
            y[i] = batch[i].r + cfg.gamma * q_eval[j, a_star[j]]
    mc = np.array([t.mc_return for t in batch])
    return cfg.beta_mmc * mc + (1.0 - cfg.beta_mmc) * y


def huber(err: np.ndarray) -> np.ndarray:
    a = np.abs(err)
    return np.where(a <= 1.0, 0.5 * err * err, a - 0.5)


def train_step(online: ParamVector, target: ParamVector,
               batch: list[Transition], cfg: DdqnConfig,
               opt: AdamState) -> float:
    """One Huber-loss gradient step toward the MMC targets; returns mean loss."""
    y = q_targets(batch, online, target, cfg)
    s = np.stack([t.s for t in batch])
    acts = np.array([t.a for t in batch])
    q, cache = forward_q(online, s, cache=True)
    pred = q[np.arange(len(batch)), acts]
    err = pred - y
    loss = float(huber(err).mean())
    dq = np.zeros_like(q)
    dq[np.arange(len(batch)), acts] = np.clip(err, -1.0, 1.0) / len(batch)
    grad = backward_q(online, cache, dq)
    optimize_step(online, grad, opt)
    return loss


def sync_target(online: ParamVector) -> ParamVector:
    return online.copy()


class DdqnLearner:
    """Owns the online/target pair, replay and schedules; one train per call."""

    def __init__(self, spec: NetSpec, cfg: DdqnConfig | None = None,
                 seed: int = 0, metrics_path=None):
        self.cfg = cfg if cfg is not None else DdqnConfig()
        self.online = init_params(spec, seed=seed)
        self.target = self.online.copy()
        self.opt = adam_init(spec, lr=self.cfg.lr)
        self.replay = ReplayMemory(self.cfg.capacity, seed=seed + 1)
        self.updates = 0
        self.env_steps = 0            # drives the epsilon schedule
        self._metrics_path = metrics_path
        self._metrics_header_written = False

    def current_epsilon(self) -> float:
        return epsilon(self.cfg, self.env_steps)

    def observe_episode(self, transitions: list[Transition]) -> None:
        finish_episode(transitions, self.cfg.gamma)
        self.replay.extend(transitions)
        self.env_steps += len(transitions)

    def train(self) -> float | None:
        if len(self.replay) < self.cfg.batch_size:
            return None
        batch = self.replay.sample(self.cfg.batch_size)
        loss = train_step(self.online, self.target, batch, self.cfg, self.opt)
        self.updates += 1
        if self.updates % self.cfg.target_sync == 0:
            self.target = sync_target(self.online)
        if self._metrics_path is not None and self.updates % 100 == 0:
            q = forward_q(self.online, np.stack([t.s for t in batch]))
            self._log(loss, float(q.mean()))
        return loss

    def _log(self, loss: float, mean_q: float) -> None:
        write_header = not self._metrics_header_written
        with open(self._metrics_path, "a", newline="") as f:
            w = csv.writer(f)
            if write_header and f.tell() == 0:
                w.writerow(["step", "loss", "epsilon", "mean_q"])
            w.writerow([self.updates, f"{loss:.6f}",
                        f"{self.current_epsilon():.4f}", f"{mean_q:.4f}"])
        self._metrics_header_written = True
