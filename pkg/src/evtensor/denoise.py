"""Reconstruction-threshold event denoising.

Coherent trajectories are well captured by a low-rank factor triple while
isolated background noise is not, so the reconstruction value at an event's
own (i, j, n) cell ranks signal above noise. Scoring evaluates single
entries straight from the factors (no full-tensor materialization); events
scoring below a threshold -- user-supplied or a quantile of the score
distribution -- are dropped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError
from .events import NOISE_LABEL, EventStream, EventTensor, bin_indices
from .tensor_ops import FactorTriple

logger = logging.getLogger(__name__)

DEFAULT_QUANTILE = 0.2  # drop the lowest-scoring 20% by default


def score_events(stream: EventStream, tensor: EventTensor,
                 factors: FactorTriple) -> np.ndarray:
    """Reconstruction value at each event's cell.

    For an event at (i, j, n) the score is sum over (x, y) of
    g_i[i, x, y] * (g_j[:, j, :] @ g_n[:, :, n].T)[x, y], vectorized over all
    events at O(M * f^2) memory.
    """
    ii, jj, nn = factors.dims
    rows, cols, n_bins = tensor.dims
    if (rows, cols, n_bins) != (ii, jj, nn):
        raise ConsistencyError(
            f"factor dims {(ii, jj, nn)} disagree with tensor dims {(rows, cols, n_bins)}"
        )
    frames = bin_indices(stream.t, tensor.bin_edges)
    if stream.i.max() >= ii or stream.j.max() >= jj or frames.max() >= nn:
        raise ConsistencyError("event coordinates exceed factor dimensions")
    a = factors.g_i[stream.i]                      # (M, x, y)
    b = factors.g_j[:, stream.j, :].transpose(1, 0, 2)  # (M, x, z)
    c = factors.g_n[:, :, frames].transpose(2, 0, 1)    # (M, y, z)
    return np.einsum("mxy,mxz,myz->m", a, b, c, optimize=True)


@dataclass
class DenoiseReport:
    threshold: float
    scores: np.ndarray
    kept: np.ndarray               # boolean mask over the stream's events
    precision: float | None = None  # of kept events being signal (labels only)
    recall: float | None = None     # of signal events being kept
    f1: float | None = None
    empty_kept: bool = False

    @property
    def n_kept(self) -> int:
        return int(self.kept.sum())

    @property
    def n_removed(self) -> int:
        return len(self.kept) - self.n_kept

    def summary(self) -> str:
        lines = [
            f"threshold: {self.threshold:.6g}",
            f"kept: {self.n_kept} / {len(self.kept)} events",
        ]
        if self.precision is not None:
            lines.append(f"signal precision: {self.precision:.4f}")
            lines.append(f"signal recall: {self.recall:.4f}")
            lines.append(f"signal F1: {self.f1:.4f}")
        if self.empty_kept:
            lines.append("warning: threshold removed every event")
        return "\n".join(lines)


def filter_events(stream: EventStream, scores: np.ndarray,
                  threshold: float) -> tuple[EventStream | None, DenoiseReport]:
    """Keep events with score >= threshold.

    When the stream is labeled, the report carries precision/recall/F1 of
    signal retention (object labels positive, noise negative). An empty kept
    set reports precision 0 with the `empty_kept` flag and returns None for
    the filtered stream.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != stream.t.shape:
        raise ConsistencyError("scores are not aligned with the event stream")
    kept = scores >= threshold
    report = DenoiseReport(threshold=float(threshold), scores=scores, kept=kept)

    if stream.has_labels:
        signal = stream.labels != NOISE_LABEL
        n_signal = int(signal.sum())
        kept_signal = int((kept & signal).sum())
        n_kept = int(kept.sum())
        report.precision = kept_signal / n_kept if n_kept else 0.0
        report.recall = kept_signal / n_signal if n_signal else 0.0
        denom = report.precision + report.recall
        report.f1 = 2 * report.precision * report.recall / denom if denom else 0.0

    if not kept.any():
        report.empty_kept = True
        return None, report

    filtered = EventStream(
        i=stream.i[kept], j=stream.j[kept], t=stream.t[kept],
        geometry=stream.geometry,
        labels=stream.labels[kept] if stream.has_labels else None,
        t_min=stream.t_min, t_max=stream.t_max,
    )
    return filtered, report


def quantile_threshold(scores: np.ndarray, quantile: float = DEFAULT_QUANTILE) -> float:
    """Score value at the given quantile (default keeps the top 80%)."""
    if not 0.0 <= quantile <= 1.0:
        raise ValueError("quantile must be in [0, 1]")
    return float(np.quantile(np.asarray(scores, dtype=np.float64), quantile))


def write_report_csv(stream: EventStream, report: DenoiseReport, path_or_fh) -> None:
    """Per-event report rows: t,i,j[,label],score,kept."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            write_report_csv(stream, report, fh)
            return
    fh = path_or_fh
    has_labels = stream.has_labels
    fh.write("t,i,j,label,score,kept\n" if has_labels else "t,i,j,score,kept\n")
    for k in range(len(stream)):
        cells = [str(int(stream.t[k])), str(int(stream.i[k])), str(int(stream.j[k]))]
        if has_labels:
            cells.append(str(int(stream.labels[k])))
        cells.append("%.17g" % report.scores[k])
        cells.append("1" if report.kept[k] else "0")
        fh.write(",".join(cells) + "\n")
