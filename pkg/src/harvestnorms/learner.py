"""From-scratch feedforward Q-learner: network, replay, epsilon-greedy, training."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import kernels
from .config import ContractError, LearnerConfig


class TrainingError(RuntimeError):
    """Raised when a training step produces a non-finite loss."""


def huber(prediction: float, target: float, delta: float = 1.0) -> float:
    """Quadratic inside |residual| <= delta, linear outside, smooth at the knee."""
    if delta <= 0:
        raise ContractError("huber delta must be positive")
    residual = prediction - target
    if abs(residual) <= delta:
        return 0.5 * residual * residual
    return delta * (abs(residual) - 0.5 * delta)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class QNetwork:
    """Two rectifier hidden layers, identity output, float64 parameters."""

    def __init__(self, n_inputs: int, n_actions: int, hidden_units: int = 128,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng()
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.hidden_units = hidden_units
        self.w1 = _glorot(rng, n_inputs, hidden_units)
        self.b1 = np.zeros(hidden_units)
        self.w2 = _glorot(rng, hidden_units, hidden_units)
        self.b2 = np.zeros(hidden_units)
        self.w3 = _glorot(rng, hidden_units, n_actions)
        self.b3 = np.zeros(n_actions)

    @property
    def params(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise ContractError(f"expected (n, {self.n_inputs}) features, got {x.shape}")
        return kernels.forward(np.ascontiguousarray(x, dtype=np.float64), *self.params)

    def forward(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape != (self.n_inputs,):
            raise ContractError(f"expected {self.n_inputs} features, got {features.shape}")
        return self.forward_batch(features[None, :])[0]

    def copy_from(self, other: "QNetwork") -> None:
        for mine, theirs in zip(self.params, other.params):
            mine[...] = theirs

    def clone(self) -> "QNetwork":
        twin = QNetwork.__new__(QNetwork)
        twin.n_inputs, twin.n_actions = self.n_inputs, self.n_actions
        twin.hidden_units = self.hidden_units
        twin.w1, twin.b1 = self.w1.copy(), self.b1.copy()
        twin.w2, twin.b2 = self.w2.copy(), self.b2.copy()
        twin.w3, twin.b3 = self.w3.copy(), self.b3.copy()
        return twin

    def save(self, path: str | Path) -> None:
        """Weights as an npz archive; array shapes carry the dimensions."""
        np.savez(path, w1=self.w1, b1=self.b1, w2=self.w2, b2=self.b2,
                 w3=self.w3, b3=self.b3)

    @classmethod
    def load(cls, path: str | Path) -> "QNetwork":
        data = np.load(path)
        net = cls.__new__(cls)
        net.w1, net.b1 = data["w1"], data["b1"]
        net.w2, net.b2 = data["w2"], data["b2"]
        net.w3, net.b3 = data["w3"], data["b3"]
        net.n_inputs = net.w1.shape[0]
        net.hidden_units = net.w1.shape[1]
        net.n_actions = net.w3.shape[1]
        return net


def select_action(net: QNetwork, features: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Uniform with probability epsilon, else greedy (ties to the lowest index)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ContractError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(net.forward(features)))


class ReplayBuffer:
    """Fixed-capacity transition ring; oldest entries are overwritten first."""

    def __init__(self, capacity: int, n_features: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, n_features))
        self.dones = np.zeros(capacity)
        self.size = 0
        self._cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, done) -> None:
        i = self._cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = 1.0 if done else 0.0
        self._cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """A batch of distinct transitions (no index repeats within the batch)."""
        if batch_size > self.size:
            raise ContractError("not enough stored transitions to sample a batch")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
        )


def train_batch(net: QNetwork, target_net: QNetwork, batch, config: LearnerConfig) -> float:
    """One gradient step of mean Huber TD loss on a sampled batch."""
    states, actions, rewards, next_states, dones = batch
    if len(states) == 0:
        raise ContractError("train_batch requires a non-empty batch")
    args = (
        *net.params,
        *target_net.params,
        np.ascontiguousarray(states, dtype=np.float64),
        np.ascontiguousarray(actions, dtype=np.int64),
        np.ascontiguousarray(rewards, dtype=np.float64),
        np.ascontiguousarray(next_states, dtype=np.float64),
        np.ascontiguousarray(dones, dtype=np.float64),
        config.discount,
    )
    loss = kernels.train_step_sgd(*args, config.learning_rate, config.huber_delta)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite training loss {loss}")
    return float(loss)


def sync_target(net: QNetwork, target_net: QNetwork, step: int, period: int) -> None:
    """Copy online weights onto the target every `period` steps."""
    if period < 1:
        raise ContractError("sync period must be at least 1")
    if step % period == 0:
        target_net.copy_from(net)


class _AdamState:
    def __init__(self, net: QNetwork, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = [np.zeros_like(p) for p in net.params]
        self.v = [np.zeros_like(p) for p in net.params]
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def apply(self, net: QNetwork, grads, lr: float) -> None:
        self.t += 1
        corr1 = 1.0 - self.beta1 ** self.t
        corr2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(net.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


class DQNLearner:
    """Policy, replay, and training cadence for one agent."""

    def __init__(self, n_inputs: int, n_actions: int, config: LearnerConfig,
                 rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.net = QNetwork(n_inputs, n_actions, config.hidden_units, rng)
        self.target = self.net.clone()
        self.buffer = ReplayBuffer(config.replay_capacity, n_inputs)
        self.epsilon = config.epsilon_start
        self.step_count = 0
        self._adam = _AdamState(self.net) if config.optimizer == "adam" else None

    def select_action(self, features: np.ndarray) -> int:
        return select_action(self.net, features, self.epsilon, self.rng)

    def store(self, state, action, reward, next_state, done) -> None:
        self.buffer.push(state, action, reward, next_state, done)

    def train(self) -> float | None:
        """One batch update when enough transitions are stored; returns the loss."""
        if len(self.buffer) < self.config.batch_size:
            return None
        batch = self.buffer.sample(self.config.batch_size, self.rng)
        if self._adam is None:
            return train_batch(self.net, self.target, batch, self.config)
        states, actions, rewards, next_states, dones = batch
        out = kernels.train_grads(
            *self.net.params, *self.target.params,
            np.ascontiguousarray(states, dtype=np.float64),
            np.ascontiguousarray(actions, dtype=np.int64),
            np.ascontiguousarray(rewards, dtype=np.float64),
            np.ascontiguousarray(next_states, dtype=np.float64),
            np.ascontiguousarray(dones, dtype=np.float64),
            self.config.discount, self.config.huber_delta)
        loss, grads = out[0], out[1:]
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite training loss {loss}")
        self._adam.apply(self.net, grads, self.config.learning_rate)
        return float(loss)

    def end_turn(self) -> None:
        """Advance the step counter and refresh the target on schedule."""
        self.step_count += 1
        sync_target(self.net, self.target, self.step_count, self.config.target_sync_period)
