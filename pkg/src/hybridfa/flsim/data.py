"""Labelled datasets, the on-disk CSV format, and client partitioning.

On-disk format (``<stem>.csv`` plus ``<stem>.json``)::

    <stem>.json   {"format": "hybridfa-dataset/1", "n_samples": 1797,
                   "n_features": 64, "n_classes": 10, "label_column": "label",
                   "feature_scale": 16.0}
    <stem>.csv    header ``f0,...,f{n_features-1},label`` then one row per
                  sample; features are decimal numbers, labels are integers
                  in ``[0, n_classes)``.

Features are divided by ``feature_scale`` on load.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT = "hybridfa-dataset/1"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.n_classes)


def load_digits() -> Dataset:
    """The 8x8 handwritten digit corpus (1797 samples), scaled to [0, 1]."""
    from sklearn.datasets import load_digits as _load

    raw = _load()
    return Dataset(raw.data.astype(float) / 16.0, raw.target.astype(np.int64), 10)


def save_dataset(ds: Dataset, stem: str | Path, feature_scale: float = 1.0) -> tuple[Path, Path]:
    stem = Path(stem)
    csv_path, meta_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    n, d = ds.X.shape
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(d)] + ["label"])
        for row, label in zip(ds.X * feature_scale, ds.y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
    meta = {"format": FORMAT, "n_samples": n, "n_features": d, "n_classes": ds.n_classes,
            "label_column": "label", "feature_scale": feature_scale}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def load_dataset(stem: str | Path) -> Dataset:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    if meta.get("format") != FORMAT:
        raise ValueError(f"unsupported dataset format {meta.get('format')!r}")
    with open(stem.with_suffix(".csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    li = header.index(meta["label_column"])
    table = np.array(rows, dtype=float)
    y = table[:, li].astype(np.int64)
    X = np.delete(table, li, axis=1) / float(meta.get("feature_scale", 1.0))
    if X.shape != (meta["n_samples"], meta["n_features"]):
        raise ValueError(f"dataset shape {X.shape} disagrees with manifest")
    if y.min() < 0 or y.max() >= meta["n_classes"]:
        raise ValueError("labels outside [0, n_classes)")
    return Dataset(X, y, int(meta["n_classes"]))


def train_test_split(ds: Dataset, rng: np.random.Generator, train_frac: float = 0.9):
    idx = rng.permutation(len(ds))
    cut = int(round(train_frac * len(ds)))
    return ds.subset(idx[:cut]), ds.subset(idx[cut:])


def partition(ds: Dataset, clients: int, mode: str, rng: np.random.Generator,
              classes_per_client: int | None = None) -> list[Dataset]:
    """Split ``ds`` into ``clients`` equal-size shards.

    ``iid``: global shuffle, then equal splits. ``noniid``: every client holds
    3 or 4 label groups (``classes_per_client``, random per client if None),
    handed out round-robin over a shuffled label order so all labels are used
    whenever ``sum(counts) >= n_classes``; each label's samples are divided
    among its holders and shards are truncated to a common size.
    """
    n = len(ds)
    if clients < 1 or n < clients:
        raise ValueError(f"cannot split {n} samples into {clients} shards")
    if mode == "iid":
        idx = rng.permutation(n)
        D = n // clients
        return [ds.subset(idx[k * D:(k + 1) * D]) for k in range(clients)]
    if mode != "noniid":
        raise ValueError(f"unknown partition mode {mode!r}")
    if classes_per_client is not None and classes_per_client not in (3, 4):
        raise ValueError("classes_per_client must be 3 or 4")
    C = ds.n_classes
    counts = (np.full(clients, classes_per_client) if classes_per_client
              else rng.integers(3, 5, size=clients))
    order = rng.permutation(C)
    labels, pos = [], 0
    for c in counts:
        labels.append(sorted({int(order[(pos + j) % C]) for j in range(min(c, C))}))
        pos += c
    holders = {lab: [k for k in range(clients) if lab in labels[k]] for lab in range(C)}
    parts: list[list[np.ndarray]] = [[] for _ in range(clients)]
    for lab in range(C):
        idx = rng.permutation(np.flatnonzero(ds.y == lab))
        if holders[lab]:
            for k, chunk in zip(holders[lab], np.array_split(idx, len(holders[lab]))):
                parts[k].append(chunk)
    shards = [rng.permutation(np.concatenate(p)) if p else np.array([], dtype=int) for p in parts]
    D = min(len(s) for s in shards)
    if D == 0:
        raise ValueError("dataset too small: some client received no samples")
    return [ds.subset(s[:D]) for s in shards]
