"""Cumulative match characteristic from a probe x gallery score matrix."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass
class ScoreMatrix:
    scores: np.ndarray
    probe_labels: list
    gallery_labels: list

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (len(self.probe_labels), len(self.gallery_labels)):
            raise ValueError(f"scores {self.scores.shape} do not match "
                             f"{len(self.probe_labels)} probes x {len(self.gallery_labels)} gallery labels")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("score matrix contains non-finite values")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["probe"] + [str(g) for g in self.gallery_labels])
        for lab, row in zip(self.probe_labels, self.scores):
            wr.writerow([str(lab)] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, label_type=int) -> "ScoreMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        gallery = [label_type(g) for g in rows[0][1:]]
        probes = [label_type(r[0]) for r in rows[1:]]
        scores = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(len(probes), len(gallery))
        return cls(scores, probes, gallery)


class LabelError(ValueError):
    pass


def probe_ranks(sm: ScoreMatrix) -> np.ndarray:
    """1-based rank of each probe's best genuine gallery entry.

    Ties are pessimistic: impostors with a score equal to the best genuine
    score are ranked ahead of it.
    """
    gallery = np.asarray(sm.gallery_labels, dtype=object)
    ranks = np.empty(len(sm.probe_labels), dtype=np.int64)
    for i, lab in enumerate(sm.probe_labels):
        genuine = gallery == lab
        if not genuine.any():
            raise LabelError(f"probe label {lab!r} has no gallery entry")
        row = sm.scores[i]
        best = row[genuine].max()
        ranks[i] = 1 + int(np.count_nonzero(~genuine & (row >= best)))
    return ranks


def cmc_curve(sm: ScoreMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(curve, ranks)``; ``curve[k - 1]`` is the fraction of probes
    with rank <= k, for k = 1 .. gallery size."""
    ranks = probe_ranks(sm)
    g = len(sm.gallery_labels)
    curve = np.array([np.count_nonzero(ranks <= k) for k in range(1, g + 1)], dtype=np.float64) / len(ranks)
    return curve, ranks


def cmc_to_csv(curve) -> str:
    lines = ["rank,accuracy"] + [f"{k},{float(v)!r}" for k, v in enumerate(curve, 1)]
    return "\n".join(lines) + "\n"


def cmc_from_csv(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    return np.array([float(r["accuracy"]) for r in rows])


def rank_summary(curve, ranks=(1, 5, 10, 20, 50)) -> dict[int, float]:
    return {k: float(curve[min(k, len(curve)) - 1]) for k in ranks}
