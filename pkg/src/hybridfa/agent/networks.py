"""Small numpy networks with hand-written backward passes.

A :class:`RecurrentNet` is an LSTM over a state history (or, with
``recurrent=False``, a dense ReLU layer on the last state), optionally
concatenated with an extra input (the action, for critics), followed by
ReLU dense layers and a linear or tanh output layer.

Parameters live in a flat ``dict[str, ndarray]`` so that optimizers,
soft updates and checkpoints can treat every network uniformly.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _uniform(rng, fan_in, shape, scale=None):
    bound = 1.0 / np.sqrt(fan_in) if scale is None else scale
    return rng.uniform(-bound, bound, size=shape)


class RecurrentNet:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, *,
                 cell_dim: int = 64, widths: tuple[int, ...] = (200, 200),
                 extra_dim: int = 0, out_act: str = "linear", recurrent: bool = True,
                 out_scale: float = 3e-3):
        if out_act not in ("linear", "tanh"):
            raise ValueError(f"unknown output activation {out_act!r}")
        self.in_dim, self.out_dim, self.extra_dim = in_dim, out_dim, extra_dim
        self.cell_dim, self.widths = cell_dim, tuple(widths)
        self.out_act, self.recurrent = out_act, recurrent
        H = cell_dim
        p: dict[str, np.ndarray] = {}
        if recurrent:
            p["lstm_W"] = _uniform(rng, in_dim + H, (in_dim + H, 4 * H))
            b = np.zeros(4 * H)
            b[H:2 * H] = 1.0  # forget gate
            p["lstm_b"] = b
        else:
            p["enc_W"] = _uniform(rng, in_dim, (in_dim, H))
            p["enc_b"] = np.zeros(H)
        prev = H + extra_dim
        for i, wd in enumerate(self.widths):
            p[f"fc{i}_W"] = _uniform(rng, prev, (prev, wd))
            p[f"fc{i}_b"] = _uniform(rng, prev, (wd,))
            prev = wd
        p["out_W"] = _uniform(rng, prev, (prev, out_dim), out_scale)
        p["out_b"] = _uniform(rng, prev, (out_dim,), out_scale)
        self.params = p
        self._cache: dict | None = None

    # -- forward ---------------------------------------------------------
    def forward(self, seq: np.ndarray, extra: np.ndarray | None = None) -> np.ndarray:
        """``seq`` is ``(T, B, in_dim)``; returns ``(B, out_dim)``."""
        p = self.params
        seq = np.asarray(seq, dtype=float)
        T, B, _ = seq.shape
        H = self.cell_dim
        cache: dict = {"seq": seq}
        if self.recurrent:
            h = np.zeros((B, H))
            c = np.zeros((B, H))
            steps = []
            for t in range(T):
                xh = np.concatenate([seq[t], h], axis=1)
                z = xh @ p["lstm_W"] + p["lstm_b"]
                i = _sigmoid(z[:, :H])
                f = _sigmoid(z[:, H:2 * H])
                o = _sigmoid(z[:, 2 * H:3 * H])
                g = np.tanh(z[:, 3 * H:])
                c_new = f * c + i * g
                tc = np.tanh(c_new)
                h_new = o * tc
                steps.append((xh, c, i, f, o, g, tc))
                h, c = h_new, c_new
            cache["steps"] = steps
            feat = h
        else:
            pre = seq[-1] @ p["enc_W"] + p["enc_b"]
            cache["enc_pre"] = pre
            feat = np.maximum(pre, 0.0)
        if self.extra_dim:
            feat = np.concatenate([feat, np.asarray(extra, dtype=float)], axis=1)
        acts = [feat]
        for k in range(len(self.widths)):
            feat = np.maximum(feat @ p[f"fc{k}_W"] + p[f"fc{k}_b"], 0.0)
            acts.append(feat)
        out = feat @ p["out_W"] + p["out_b"]
        if self.out_act == "tanh":
            out = np.tanh(out)
        cache["acts"] = acts
        cache["out"] = out
        self._cache = cache
        return out

    __call__ = forward

    # -- backward --------------------------------------------------------
    def backward(self, dout: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
        """Gradients of ``sum(dout * output)`` w.r.t. parameters and the extra input.

        Uses the cache of the most recent :meth:`forward` call.
        """
        if self._cache is None:
            raise RuntimeError("backward() called before forward()")
        p, cache = self.params, self._cache
        grads: dict[str, np.ndarray] = {}
        d = np.asarray(dout, dtype=float)
        if self.out_act == "tanh":
            d = d * (1.0 - cache["out"] ** 2)
        acts = cache["acts"]
        grads["out_W"] = acts[-1].T @ d
        grads["out_b"] = d.sum(axis=0)
        d = d @ p["out_W"].T
        for k in reversed(range(len(self.widths))):
            d = d * (acts[k + 1] > 0)
            grads[f"fc{k}_W"] = acts[k].T @ d
            grads[f"fc{k}_b"] = d.sum(axis=0)
            d = d @ p[f"fc{k}_W"].T
        H = self.cell_dim
        d_extra = None
        if self.extra_dim:
            d, d_extra = d[:, :H], d[:, H:]
        if self.recurrent:
            dW = np.zeros_like(p["lstm_W"])
            db = np.zeros_like(p["lstm_b"])
            dh, dc = d, np.zeros_like(d)
            for xh, c_prev, i, f, o, g, tc in reversed(cache["steps"]):
                do = dh * tc
                dc = dc + dh * o * (1.0 - tc ** 2)
                di = dc * g
                dg = dc * i
                df = dc * c_prev
                dz = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                                     do * o * (1 - o), dg * (1 - g ** 2)], axis=1)
                dW += xh.T @ dz
                db += dz.sum(axis=0)
                dxh = dz @ p["lstm_W"].T
                dh = dxh[:, self.in_dim:]
                dc = dc * f
            grads["lstm_W"], grads["lstm_b"] = dW, db
        else:
            d = d * (cache["enc_pre"] > 0)
            grads["enc_W"] = cache["seq"][-1].T @ d
            grads["enc_b"] = d.sum(axis=0)
        return grads, d_extra

    # -- parameter utilities --------------------------------------------
    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        for k, v in params.items():
            if k not in self.params or self.params[k].shape != np.shape(v):
                raise ValueError(f"parameter {k!r} missing or mis-shaped")
            self.params[k] = np.array(v, dtype=float)

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))


class Adam:
    """Adam over a parameter dict, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params, self.lr = params, lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        if self.lr == 0.0:
            return
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr = np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            self.params[k] -= self.lr * corr * self.m[k] / (np.sqrt(self.v[k]) + self.eps)


def soft_update(target: dict[str, np.ndarray], online: dict[str, np.ndarray], tau: float) -> None:
    """``target <- tau * online + (1 - tau) * target`` in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for k, v in online.items():
        if k not in target or target[k].shape != v.shape:
            raise ValueError(f"shape mismatch for parameter {k!r}")
        if tau == 1.0:
            target[k][...] = v
        else:
            target[k][...] = tau * v + (1.0 - tau) * target[k]
