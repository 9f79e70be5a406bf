"""Evaluation reports: accuracy plus confusion counts."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import LabelScheme


@dataclass(eq=False)
class EvaluationReport:
    accuracy: float
    confusion: np.ndarray  # rows: true class, cols: predicted class
    n_total: int
    label_scheme: LabelScheme
    dataset_tag: str = ""
    model_digest: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def class_totals(self) -> list[int]:
        return [int(v) for v in self.confusion.sum(axis=1)]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.astype(int).tolist(),
            "n_total": self.n_total,
            "label_scheme": self.label_scheme.value,
            "class_names": list(self.label_scheme.class_names),
            "dataset_tag": self.dataset_tag,
            "model_digest": self.model_digest,
            "notes": self.notes,
        }

    def merge(self, other: "EvaluationReport") -> "EvaluationReport":
        """Combine two reports over disjoint record sets."""
        if other.label_scheme != self.label_scheme:
            raise ValueError("cannot merge reports under different label schemes")
        conf = self.confusion + other.confusion
        n = int(conf.sum())
        return EvaluationReport(
            float(np.trace(conf)) / n if n else 0.0, conf, n, self.label_scheme,
            self.dataset_tag, self.model_digest, {**self.notes, **other.notes},
        )


def build_report(y_true, y_pred, label_scheme: LabelScheme, **meta) -> EvaluationReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("true and predicted labels differ in length")
    c = label_scheme.n_classes
    conf = np.zeros((c, c), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    n = int(len(y_true))
    acc = float(np.trace(conf)) / n if n else 0.0
    return EvaluationReport(acc, conf, n, label_scheme, **meta)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_jsonl(rows: Sequence[dict], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_table(rows: Sequence[dict], path, columns: Sequence[str] | None = None) -> None:
    """Tab-separated table with a header row."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return "" if v is None else str(v)
