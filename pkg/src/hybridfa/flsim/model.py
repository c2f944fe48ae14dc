"""Dense ReLU classifier with a softmax cross-entropy head, on a flat parameter vector."""

from __future__ import annotations

import numpy as np


class MLP:
    def __init__(self, in_dim: int, hidden: tuple[int, ...], n_classes: int):
        self.sizes = [in_dim, *hidden, n_classes]
        self.shapes = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self.shapes += [(a, b), (b,)]
        self.n_params = int(sum(np.prod(s) for s in self.shapes))

    def init(self, rng: np.random.Generator) -> np.ndarray:
        """He-uniform weights, zero biases."""
        parts = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            bound = np.sqrt(6.0 / a)
            parts += [rng.uniform(-bound, bound, (a, b)).ravel(), np.zeros(b)]
        return np.concatenate(parts)

    def unflatten(self, theta: np.ndarray) -> list[np.ndarray]:
        out, i = [], 0
        for s in self.shapes:
            n = int(np.prod(s))
            out.append(theta[i:i + n].reshape(s))
            i += n
        return out

    def logits(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        layers = self.unflatten(theta)
        h = X
        for j in range(0, len(layers) - 2, 2):
            h = np.maximum(h @ layers[j] + layers[j + 1], 0.0)
        return h @ layers[-2] + layers[-1]

    def loss_and_grad(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Mean cross-entropy over the batch and its gradient w.r.t. ``theta``."""
        layers = self.unflatten(theta)
        acts = [X]
        h = X
        for j in range(0, len(layers) - 2, 2):
            h = np.maximum(h @ layers[j] + layers[j + 1], 0.0)
            acts.append(h)
        z = h @ layers[-2] + layers[-1]
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        n = len(y)
        loss = -float(np.mean(logp[np.arange(n), y]))
        d = np.exp(logp)
        d[np.arange(n), y] -= 1.0
        d /= n
        grads = [None] * len(layers)
        for j in range(len(layers) - 2, -1, -2):
            a = acts[j // 2]
            grads[j] = a.T @ d
            grads[j + 1] = d.sum(axis=0)
            if j > 0:
                d = (d @ layers[j].T) * (a > 0)
        return loss, np.concatenate([g.ravel() for g in grads])

    def accuracy(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(np.argmax(self.logits(theta, X), axis=1) == y))
