"""Ring replay memory that samples length-J windows inside one episode."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int, action_dim: int, window: int):
        if window < 1 or capacity < window:
            raise ValueError("need 1 <= window <= capacity")
        self.capacity, self.window = capacity, window
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.episode = np.full(capacity, -1, dtype=np.int64)
        self.step = np.full(capacity, -1, dtype=np.int64)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, state, action, reward, next_state, done, episode: int, step: int) -> None:
        i = self.ptr
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.done[i] = done
        self.episode[i] = episode
        self.step[i] = step
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def valid_ends(self) -> np.ndarray:
        """Indices whose preceding ``window - 1`` entries are the same episode, in order."""
        J = self.window
        idx = np.arange(self.capacity)
        start = (idx - (J - 1)) % self.capacity
        ok = (self.episode >= 0) & (self.step >= J - 1)
        ok &= self.episode[start] == self.episode
        ok &= self.step[start] == self.step - (J - 1)
        return idx[ok]

    def n_windows(self) -> int:
        return int(self.valid_ends().size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Uniform mini-batch of windows; state arrays are ``(J, B, state_dim)``."""
        ends = self.valid_ends()
        if ends.size < batch_size:
            raise ValueError(f"buffer holds {ends.size} complete windows, need {batch_size}")
        end = rng.choice(ends, size=batch_size, replace=False)
        J = self.window
        rows = (end[None, :] - np.arange(J - 1, -1, -1)[:, None]) % self.capacity
        seq = self.states[rows]
        nxt = np.concatenate([seq[1:], self.next_states[end][None]], axis=0)
        return {
            "states": seq,
            "actions": self.actions[end],
            "rewards": self.rewards[end],
            "next_states": nxt,
            "done": self.done[end],
            "index": end,
        }
