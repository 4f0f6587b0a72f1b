"""Oriented-detection evaluation: greedy confidence-ordered matching at
IoU > 0.5, precision/recall/F-score, confidence sweeps, average precision
and mAP, mean IoU / oriented IoU, and grouped reporting.

Matching uses the base class only; orientation quality is scored separately
through the oriented IoU, never by denying a match.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoding import (
    AngleQuantizer,
    ObjectCatalog,
    OrientedLabel,
    UnknownClass,
    decode_prediction,
)
from .geometry import aabb_of_obb, oriented_iou, polygon_iou

__all__ = [
    "EvaluationError",
    "EmptyMatchSet",
    "Match",
    "MatchResult",
    "PrCurve",
    "ClassStats",
    "EvalReport",
    "CONFIDENCE_THRESHOLDS",
    "match_predictions",
    "oiou_stats",
    "decode_frames",
    "pr_curve",
    "average_precision",
    "evaluate",
]


class EvaluationError(RuntimeError):
    pass


class EmptyMatchSet(EvaluationError):
    """No true positives; IoU statistics are undefined (absent, not zero)."""


# confidence sweep 0.0 .. 1.0 with a step of 0.05
CONFIDENCE_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class Match:
    pred_index: int
    gt_index: int | None
    iou: float
    oiou: float
    verdict: str  # "TP" | "FP"


@dataclass(frozen=True)
class MatchResult:
    matches: tuple
    fn_count: int

    @property
    def tp_count(self) -> int:
        return sum(1 for m in self.matches if m.verdict == "TP")

    @property
    def fp_count(self) -> int:
        return sum(1 for m in self.matches if m.verdict == "FP")


@dataclass(frozen=True)
class PrCurve:
    thresholds: tuple
    precision: tuple
    recall: tuple


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    fscore: float
    mean_iou: float | None
    mean_oiou: float | None
    ap: float


@dataclass
class EvalReport:
    per_class: dict
    groups: dict
    map: float
    iou_threshold: float
    confidence_threshold: float

    def to_dict(self):
        def stats_obj(s: ClassStats):
            return {
                "precision": s.precision,
                "recall": s.recall,
                "fscore": s.fscore,
                "iou": s.mean_iou,
                "oiou": s.mean_oiou,
                "ap": s.ap,
            }

        return {
            "iou_threshold": self.iou_threshold,
            "confidence_threshold": self.confidence_threshold,
            "map": self.map,
            "per_class": {name: stats_obj(s) for name, s in self.per_class.items()},
            "groups": {name: stats_obj(s) for name, s in self.groups.items()},
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["name", "precision", "recall", "fscore", "iou", "oiou", "ap"]
            )

            def fmt(v):
                return "" if v is None else f"{v:.4f}"

            for name, s in self.per_class.items():
                writer.writerow(
                    [name, fmt(s.precision), fmt(s.recall), fmt(s.fscore),
                     fmt(s.mean_iou), fmt(s.mean_oiou), fmt(s.ap)]
                )
            for name, s in self.groups.items():
                writer.writerow(
                    [name, fmt(s.precision), fmt(s.recall), fmt(s.fscore),
                     fmt(s.mean_iou), fmt(s.mean_oiou), fmt(s.ap)]
                )
            writer.writerow(["mAP", f"{self.map:.4f}", "", "", "", "", ""])


def match_predictions(preds, gts, iou_threshold: float = 0.5) -> MatchResult:
    """Greedy confidence-ordered assignment within one frame.

    Each prediction (descending confidence, stable on ties) claims the
    highest-IoU unmatched same-class ground truth with IoU above the
    threshold, else it is a false positive. Unclaimed ground truths are
    false negatives.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    taken = [False] * len(gts)
    matches = []
    for pi in order:
        p = preds[pi]
        best_j, best_iou = None, iou_threshold
        for j, g in enumerate(gts):
            if taken[j] or g.class_id != p.class_id:
                continue
            iou = polygon_iou(p.obb, g.obb)
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j is None:
            matches.append(Match(pred_index=pi, gt_index=None, iou=0.0, oiou=0.0, verdict="FP"))
        else:
            taken[best_j] = True
            matches.append(
                Match(
                    pred_index=pi,
                    gt_index=best_j,
                    iou=best_iou,
                    oiou=oriented_iou(p.obb, gts[best_j].obb),
                    verdict="TP",
                )
            )
    matches.sort(key=lambda m: m.pred_index)
    return MatchResult(matches=tuple(matches), fn_count=taken.count(False))


def oiou_stats(result: MatchResult):
    """Mean IoU / oriented IoU over true-positive pairs only."""
    tps = [m for m in result.matches if m.verdict == "TP"]
    if not tps:
        return {"mean_iou": None, "mean_oiou": None}
    return {
        "mean_iou": sum(m.iou for m in tps) / len(tps),
        "mean_oiou": sum(m.oiou for m in tps) / len(tps),
    }


def decode_frames(pred_frames, q: AngleQuantizer, catalog: ObjectCatalog):
    """Decode per-frame unoriented predictions; undecodable ones (unknown
    class, degenerate geometry) are dropped."""
    from .geometry import GeometryError

    out = []
    for preds in pred_frames:
        decoded = []
        for p in preds:
            if isinstance(p, OrientedLabel):
                decoded.append(p)
                continue
            try:
                decoded.append(decode_prediction(q, catalog, p))
            except (UnknownClass, GeometryError):
                pass
        out.append(decoded)
    return out


def _counts_at_threshold(decoded_frames, gt_frames, threshold, iou_threshold, num_classes):
    tp = np.zeros(num_classes, dtype=int)
    fp = np.zeros(num_classes, dtype=int)
    fn = np.zeros(num_classes, dtype=int)
    per_class_tp_iou = [[] for _ in range(num_classes)]
    per_class_tp_oiou = [[] for _ in range(num_classes)]
    for preds, gts in zip(decoded_frames, gt_frames):
        kept = [p for p in preds if p.confidence >= threshold]
        result = match_predictions(kept, gts, iou_threshold)
        for m in result.matches:
            c = kept[m.pred_index].class_id
            if c >= num_classes:
                continue
            if m.verdict == "TP":
                tp[c] += 1
                per_class_tp_iou[c].append(m.iou)
                per_class_tp_oiou[c].append(m.oiou)
            else:
                fp[c] += 1
        matched_gt = {m.gt_index for m in result.matches if m.gt_index is not None}
        for j, g in enumerate(gts):
            if j not in matched_gt and g.class_id < num_classes:
                fn[g.class_id] += 1
    return tp, fp, fn, per_class_tp_iou, per_class_tp_oiou


def _precision(tp: int, fp: int) -> float:
    # precision of an empty prediction set is 1 by convention, so the
    # sweep stays a total function
    return tp / (tp + fp) if tp + fp > 0 else 1.0


def _recall(tp: int, fn: int) -> float:
    return tp / (tp + fn) if tp + fn > 0 else 1.0


def pr_curve(
    pred_frames,
    gt_frames,
    q: AngleQuantizer,
    catalog: ObjectCatalog,
    iou_threshold: float = 0.5,
):
    """Per-class precision/recall over the confidence sweep.

    ``pred_frames`` may hold raw UnorientedLabels (decoded here) or already
    decoded OrientedLabels.
    """
    decoded = decode_frames(pred_frames, q, catalog)
    num_classes = len(catalog)
    curves = {}
    per_t = [
        _counts_at_threshold(decoded, gt_frames, t, iou_threshold, num_classes)[:3]
        for t in CONFIDENCE_THRESHOLDS
    ]
    for c in range(num_classes):
        precision = tuple(_precision(tp[c], fp[c]) for tp, fp, fn in per_t)
        recall = tuple(_recall(tp[c], fn[c]) for tp, fp, fn in per_t)
        curves[c] = PrCurve(
            thresholds=CONFIDENCE_THRESHOLDS, precision=precision, recall=recall
        )
    return curves


def average_precision(curve: PrCurve) -> float:
    """Trapezoidal area under precision vs recall.

    The curve is padded with a recall-0 point carrying the max-threshold
    precision; the min-threshold point is the other endpoint.
    """
    pts = sorted(zip(curve.recall, curve.precision))
    pts = [(0.0, curve.precision[-1])] + pts
    r = [p[0] for p in pts]
    p = [q_[1] for q_ in pts]
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(p, r))


def evaluate(
    pred_frames,
    gt_frames,
    q: AngleQuantizer,
    catalog: ObjectCatalog,
    iou_threshold: float = 0.5,
    confidence_threshold: float = 0.0,
) -> EvalReport:
    """Full report: per-class stats at a fixed confidence operating point,
    per-class AP over the sweep, unweighted group aggregates and mAP."""
    decoded = decode_frames(pred_frames, q, catalog)
    num_classes = len(catalog)
    tp, fp, fn, ious, oious = _counts_at_threshold(
        decoded, gt_frames, confidence_threshold, iou_threshold, num_classes
    )
    curves = pr_curve(decoded, gt_frames, q, catalog, iou_threshold)

    per_class = {}
    for c in range(num_classes):
        prec = _precision(tp[c], fp[c])
        rec = _recall(tp[c], fn[c])
        fscore = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        per_class[catalog[c].name] = ClassStats(
            precision=prec,
            recall=rec,
            fscore=fscore,
            mean_iou=float(np.mean(ious[c])) if ious[c] else None,
            mean_oiou=float(np.mean(oious[c])) if oious[c] else None,
            ap=average_precision(curves[c]),
        )

    def aggregate(names):
        members = [per_class[n] for n in names]
        if not members:
            return None

        def mean_of(vals):
            vals = [v for v in vals if v is not None]
            return float(np.mean(vals)) if vals else None

        return ClassStats(
            precision=float(np.mean([m.precision for m in members])),
            recall=float(np.mean([m.recall for m in members])),
            fscore=float(np.mean([m.fscore for m in members])),
            mean_iou=mean_of([m.mean_iou for m in members]),
            mean_oiou=mean_of([m.mean_oiou for m in members]),
            ap=float(np.mean([m.ap for m in members])),
        )

    groups = {}
    for gname in catalog.groups:
        agg = aggregate([e.name for e in catalog if e.group == gname])
        if agg is not None:
            groups[gname] = agg
    groups["global"] = aggregate([e.name for e in catalog])

    m_ap = float(np.mean([s.ap for s in per_class.values()]))
    return EvalReport(
        per_class=per_class,
        groups=groups,
        map=m_ap,
        iou_threshold=iou_threshold,
        confidence_threshold=confidence_threshold,
    )
