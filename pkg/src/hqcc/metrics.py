"""Accuracy, macro recall/F1, rank AUC and confusion matrices."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class EvalRecord:
    scores: np.ndarray  # (count, K) class probabilities
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.ndim != 2 or len(self.scores) != len(self.labels):
            raise ValueError(f"scores {self.scores.shape} do not match labels {self.labels.shape}")
        if np.any(self.scores < 0) or np.any(np.abs(self.scores.sum(axis=1) - 1) > 1e-9):
            raise ValueError("scores must be probability vectors")

    @property
    def predictions(self) -> np.ndarray:
        return self.scores.argmax(axis=1)  # ties -> lowest class index


def accuracy(record: EvalRecord) -> float:
    if len(record.labels) == 0:
        raise ValueError("accuracy of an empty record")
    return 100.0 * float(np.mean(record.predictions == record.labels))


def confusion_matrix(record: EvalRecord, k: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    pred = record.predictions
    if np.any(record.labels >= k) or np.any(record.labels < 0) or np.any(pred >= k):
        raise ValueError(f"label outside 0..{k - 1}")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (record.labels, pred), 1)
    return cm


def recall_f1_from_confusion(cm: np.ndarray) -> tuple[float, float]:
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    actual = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        recall = np.where(actual > 0, tp / actual, 0.0)
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return float(recall.mean()), float(f1.mean())


def recall_f1(record: EvalRecord, k: int) -> tuple[float, float]:
    """Macro-averaged (recall, F1); 0/0 counts as 0."""
    if len(record.labels) == 0:
        raise ValueError("recall/F1 of an empty record")
    return recall_f1_from_confusion(confusion_matrix(record, k))


def auc_binary(scores, labels) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def evaluate_record(record: EvalRecord, k: int) -> dict:
    rec, f1 = recall_f1(record, k)
    out = {"accuracy": accuracy(record), "recall": rec, "f1": f1}
    if k == 2:
        out["auc"] = auc_binary(record.scores[:, 1], record.labels)
    return out


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return float(v.mean()), std


def format_pm(values, digits: int = 2) -> str:
    m, s = mean_std(values)
    return f"{m:.{digits}f}±{s:.{digits}f}"


def append_log(path, record: dict):
    """Append one JSON line; keys sorted so identical records give identical bytes."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
