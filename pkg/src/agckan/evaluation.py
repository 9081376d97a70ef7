"""Confusion matrices, derived metrics, and the evaluation report."""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

import numpy as np

from .errors import InvalidArgumentError


@dataclass
class ConfusionMatrix:
    tp: float
    tn: float
    fp: float
    fn: float

    @property
    def total(self) -> float:
        return self.tp + self.tn + self.fp + self.fn

    def as_percentages(self):
        tot = self.total
        if tot == 0:
            raise InvalidArgumentError("empty confusion matrix")
        return {k: 100.0 * v / tot
                for k, v in (("tp", self.tp), ("tn", self.tn),
                             ("fp", self.fp), ("fn", self.fn))}

    def to_dict(self):
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(y_true, y_pred) -> ConfusionMatrix:
    yt = np.asarray(y_true)
    yp = np.asarray(y_pred)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise InvalidArgumentError("y_true and y_pred must be 1-D and equal length")
    if yt.size == 0:
        raise InvalidArgumentError("empty label arrays")
    bad = set(np.unique(yt)) | set(np.unique(yp))
    if not bad <= {0, 1}:
        raise InvalidArgumentError(f"labels must be 0/1, got {sorted(bad)}")
    yt = yt.astype(bool)
    yp = yp.astype(bool)
    return ConfusionMatrix(
        tp=float(np.sum(yt & yp)), tn=float(np.sum(~yt & ~yp)),
        fp=float(np.sum(~yt & yp)), fn=float(np.sum(yt & ~yp)))


def _round2(v: float) -> float:
    """Round half-up to two decimals (table convention)."""
    return float(Decimal(repr(v)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def metrics(cm: ConfusionMatrix) -> dict:
    """accuracy, precision, recall, f1 as percentages; 0/0 ratios -> 0.

    Precision and recall score the normal class (tn column) as positive:
    precision = tn/(tn+fp), recall = tn/(tn+fn).  This is the orientation
    that reproduces the reference result tables; percentages are rounded
    half-up to two decimals to match their precision.
    """
    tot = cm.total
    if tot == 0:
        raise InvalidArgumentError("empty confusion matrix")
    acc = (cm.tp + cm.tn) / tot
    prec = cm.tn / (cm.tn + cm.fp) if (cm.tn + cm.fp) > 0 else 0.0
    rec = cm.tn / (cm.tn + cm.fn) if (cm.tn + cm.fn) > 0 else 0.0
    f1 = 2.0 * prec * rec / (prec + rec) if (prec + rec) > 0 else 0.0
    return {"accuracy": _round2(100.0 * acc), "precision": _round2(100.0 * prec),
            "recall": _round2(100.0 * rec), "f1": _round2(100.0 * f1)}


def report(y_true, kan_pred, sym_pred, gap_threshold: float = 2.0) -> dict:
    """Side-by-side KAN vs symbolic evaluation with an accuracy-gap audit.

    The audit flags the symbolic expression when its accuracy trails the
    network's by more than gap_threshold percentage points.
    """
    cm_kan = confusion(y_true, kan_pred)
    cm_sym = confusion(y_true, sym_pred)
    m_kan = metrics(cm_kan)
    m_sym = metrics(cm_sym)
    gap = m_kan["accuracy"] - m_sym["accuracy"]
    return {
        "kan": {"confusion": cm_kan.to_dict(),
                "confusion_pct": cm_kan.as_percentages(), "metrics": m_kan},
        "symbolic": {"confusion": cm_sym.to_dict(),
                     "confusion_pct": cm_sym.as_percentages(), "metrics": m_sym},
        "accuracy_gap": gap,
        "gap_threshold": gap_threshold,
        "gap_exceeded": bool(gap > gap_threshold),
    }


def write_report_json(rep: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rep, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_report_csv(rep: dict, path):
    rows = []
    for model in ("kan", "symbolic"):
        m = rep[model]["metrics"]
        p = rep[model]["confusion_pct"]
        rows.append([model, p["tp"], p["tn"], p["fp"], p["fn"],
                     m["accuracy"], m["precision"], m["recall"], m["f1"]])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model,tp_pct,tn_pct,fp_pct,fn_pct,accuracy,precision,recall,f1\n")
        for row in rows:
            fh.write(row[0] + "," + ",".join(f"{v:.6f}" for v in row[1:]) + "\n")
