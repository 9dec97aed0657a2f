"""Classification-based evaluation of learned factors.

Each labeled event at coordinates (i, j, n) gets a feature vector by
concatenating the vectorized latent slices of the three factors at its
coordinates -- row i of the matricized g_i, row j of the matricized g_j,
row n of the matricized g_n -- length 3*f^2 total. Frames are split
temporally (first 60% train, rest test), a linear SVM is trained on
standardized features, and ranking quality is scored with AUC.

The regularization sweep reruns the whole pipeline per (lambda1, lambda2)
grid point and summarizes sensitivity with the AUC gap,
100 * (highest - lowest) / highest.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from .errors import ConsistencyError, ProtocolError
from .events import NOISE_LABEL, EventStream, EventTensor, bin_indices
from .solver import SolverConfig, solve
from .tensor_ops import FactorTriple, matricize_factor

logger = logging.getLogger(__name__)

TASK_OBJECTS = "objects"
TASK_NOISE = "noise"


@dataclass
class FeatureMatrix:
    """Per-event latent features with labels, frame indices, and split tags."""

    features: np.ndarray        # (M, 3*f^2)
    labels: np.ndarray          # (M,) raw integer labels
    frames: np.ndarray          # (M,) bin index per event
    n_frames: int
    is_train: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_train is None:
            raise ProtocolError("temporal_split has not been applied")
        return self.features[self.is_train], self.labels[self.is_train]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_train is None:
            raise ProtocolError("temporal_split has not been applied")
        return self.features[~self.is_train], self.labels[~self.is_train]


def extract_features(stream: EventStream, tensor: EventTensor,
                     factors: FactorTriple) -> FeatureMatrix:
    """One row per labeled event: [g_i slice at i | g_j slice at j | g_n slice
    at n], each slice vectorized with the shared latent-pair flattening."""
    if not stream.has_labels:
        raise ProtocolError("feature extraction requires a labeled stream")
    ii, jj, nn = factors.dims
    rows, cols, n_bins = tensor.dims
    if (rows, cols, n_bins) != (ii, jj, nn):
        raise ConsistencyError(
            f"factor dims {(ii, jj, nn)} disagree with tensor dims {(rows, cols, n_bins)}"
        )
    frames = bin_indices(stream.t, tensor.bin_edges)
    if stream.i.max() >= ii or stream.j.max() >= jj or frames.max() >= nn:
        raise ConsistencyError("event coordinates exceed factor dimensions")
    mat_i = matricize_factor(factors.g_i, "i")
    mat_j = matricize_factor(factors.g_j, "j")
    mat_n = matricize_factor(factors.g_n, "n")
    features = np.hstack([mat_i[stream.i], mat_j[stream.j], mat_n[frames]])
    return FeatureMatrix(
        features=features,
        labels=stream.labels.copy(),
        frames=frames,
        n_frames=nn,
    )


def temporal_split(features: FeatureMatrix, train_fraction: float = 0.6) -> FeatureMatrix:
    """Tag events in frames 0 .. ceil(train_fraction * N) - 1 as train, the
    rest as test. Label-blind by construction: assignment depends only on the
    frame index."""
    cutoff = math.ceil(train_fraction * features.n_frames)
    is_train = features.frames < cutoff
    if not is_train.any():
        raise ProtocolError("temporal split produced an empty train partition")
    if is_train.all():
        raise ProtocolError("temporal split produced an empty test partition")
    return replace(features, is_train=is_train)


def binary_task(labels: np.ndarray, task: str) -> tuple[np.ndarray, np.ndarray]:
    """Reduce raw labels to a binary task.

    'objects': keep only object-labeled events (exactly two object classes
    required); positives are the higher object id. 'noise': keep everything;
    positives are signal (label >= 0), negatives noise.
    Returns (row mask, 0/1 targets for the masked rows).
    """
    if task == TASK_NOISE:
        mask = np.ones(len(labels), dtype=bool)
        return mask, (labels >= 0).astype(np.int64)
    if task == TASK_OBJECTS:
        mask = labels != NOISE_LABEL
        classes = np.unique(labels[mask])
        if len(classes) != 2:
            raise ProtocolError(
                f"object task needs exactly two object classes, found {classes.tolist()}"
            )
        return mask, (labels[mask] == classes[1]).astype(np.int64)
    raise ValueError(f"unknown task {task!r}")


@dataclass
class SvmModel:
    """Linear max-margin classifier with train-set standardization baked in."""

    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    reg_lambda: float
    epochs: int

    def decision_scores(self, features: np.ndarray) -> np.ndarray:
        """Raw signed margins (AUC is rank-based; no calibration)."""
        z = (features - self.mean) / self.std
        return z @ self.weights + self.bias


def train_svm(features: np.ndarray, targets: np.ndarray,
              reg_lambda: float = 1e-3, epochs: int = 500) -> SvmModel:
    """Deterministic full-batch subgradient descent on the L2-regularized
    hinge loss. Features are standardized per dimension with train statistics;
    the bias is left unregularized. Full-batch updates mean a duplicated
    training set yields the identical model.
    """
    targets = np.asarray(targets)
    classes = np.unique(targets)
    if len(classes) < 2:
        raise ProtocolError("training set contains a single class")
    y = np.where(targets == classes.max(), 1.0, -1.0)

    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std == 0.0] = 1.0  # constant dims carry no signal; avoid divide-by-zero
    z = (features - mean) / std

    n, d = z.shape
    w = np.zeros(d)
    b = 0.0
    for t in range(1, epochs + 1):
        lr = 1.0 / (reg_lambda * (t + 1))
        margins = y * (z @ w + b)
        viol = margins < 1.0
        grad_w = reg_lambda * w
        grad_b = 0.0
        if viol.any():
            grad_w = grad_w - (y[viol, None] * z[viol]).sum(axis=0) / n
            grad_b = -y[viol].sum() / n
        w = w - lr * grad_w
        b = b - lr * grad_b
    return SvmModel(weights=w, bias=b, mean=mean, std=std,
                    reg_lambda=reg_lambda, epochs=epochs)


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a random positive outscores a random negative, ties half
    (rank-based Mann-Whitney form)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ProtocolError("AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_gap(aucs) -> float:
    """100 * (highest - lowest) / highest over a set of AUC values."""
    values = [a for a in aucs if not math.isnan(a)]
    if not values:
        return float("nan")
    highest = max(values)
    if highest == 0.0:
        return 0.0
    return 100.0 * (highest - min(values)) / highest


def evaluate_pipeline(tensor: EventTensor, stream: EventStream, cfg: SolverConfig,
                      task: str = TASK_OBJECTS, train_fraction: float = 0.6,
                      svm_lambda: float = 1e-3, svm_epochs: int = 500):
    """Decompose, extract features, split, train, score. Returns (auc, state, model)."""
    factors, state = solve(tensor, cfg)
    feats = temporal_split(extract_features(stream, tensor, factors), train_fraction)
    # derive the task mapping from the full label set so train and test share it
    mask, y = binary_task(feats.labels, task)
    tr = mask & feats.is_train
    te = mask & ~feats.is_train
    y_tr = y[feats.is_train[mask]]
    y_te = y[~feats.is_train[mask]]
    if len(y_tr) == 0 or len(y_te) == 0:
        raise ProtocolError("task selection emptied a partition")
    model = train_svm(feats.features[tr], y_tr, reg_lambda=svm_lambda, epochs=svm_epochs)
    value = auc(model.decision_scores(feats.features[te]), y_te)
    return value, state, model


@dataclass
class SweepCell:
    lambda1: float
    lambda2: float
    auc: float
    converged: bool
    iters: int
    seconds: float
    error: str | None = None


@dataclass
class SweepResult:
    cells: list[SweepCell]

    def aucs(self) -> list[float]:
        return [c.auc for c in self.cells]

    def overall_gap(self) -> float:
        return auc_gap(self.aucs())

    def axis_gaps(self, axis: str) -> list[tuple[float, float]]:
        """Gap per grid line along `axis` ('lambda1' varies lambda1 holding
        lambda2 fixed, and vice versa). Returns (held value, gap) pairs."""
        if axis not in ("lambda1", "lambda2"):
            raise ValueError(f"unknown axis {axis!r}")
        held = "lambda2" if axis == "lambda1" else "lambda1"
        out = []
        for value in sorted({getattr(c, held) for c in self.cells}):
            line = [c.auc for c in self.cells if getattr(c, held) == value]
            if len(line) > 1:
                out.append((value, auc_gap(line)))
        return out


def sweep_lambdas(tensor: EventTensor, stream: EventStream, grid,
                  base_cfg: SolverConfig, task: str = TASK_OBJECTS) -> SweepResult:
    """Run the full pipeline per (lambda1, lambda2) grid point, seeded
    identically; per-cell failures are recorded without aborting the sweep."""
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    cells = []
    for lambda1, lambda2 in grid:
        start = time.perf_counter()
        try:
            cfg = replace(base_cfg, lambda1=lambda1, lambda2=lambda2)
            value, state, _ = evaluate_pipeline(tensor, stream, cfg, task=task)
            cells.append(SweepCell(
                lambda1=lambda1, lambda2=lambda2, auc=value,
                converged=state.converged, iters=state.s,
                seconds=time.perf_counter() - start,
            ))
        except Exception as exc:  # record and continue; sweeps must not abort
            logger.warning("sweep cell (%g, %g) failed: %s", lambda1, lambda2, exc)
            cells.append(SweepCell(
                lambda1=lambda1, lambda2=lambda2, auc=float("nan"),
                converged=False, iters=0,
                seconds=time.perf_counter() - start, error=str(exc),
            ))
    return SweepResult(cells=cells)


def write_results_csv(result: SweepResult, path_or_fh) -> None:
    """Results CSV: one row per grid cell plus gap summary comment lines."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            write_results_csv(result, fh)
            return
    fh = path_or_fh
    fh.write("lambda1,lambda2,auc,converged,iters,seconds\n")
    for c in result.cells:
        fh.write("%g,%g,%.17g,%s,%d,%.3f\n"
                 % (c.lambda1, c.lambda2, c.auc, str(c.converged).lower(), c.iters, c.seconds))
    fh.write("# overall_gap_percent: %.6g\n" % result.overall_gap())
    for axis in ("lambda1", "lambda2"):
        held = "lambda2" if axis == "lambda1" else "lambda1"
        for value, gap in result.axis_gaps(axis):
            fh.write("# gap_percent_varying_%s[%s=%g]: %.6g\n" % (axis, held, value, gap))


def save_model(model: SvmModel, path_or_fh) -> None:
    """Plain-text model file: weights, bias, standardization vectors."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            save_model(model, fh)
            return
    fh = path_or_fh
    fh.write("weights " + " ".join("%.17g" % v for v in model.weights) + "\n")
    fh.write("bias %.17g\n" % model.bias)
    fh.write("mean " + " ".join("%.17g" % v for v in model.mean) + "\n")
    fh.write("std " + " ".join("%.17g" % v for v in model.std) + "\n")
    fh.write("reg_lambda %.17g\n" % model.reg_lambda)
    fh.write("epochs %d\n" % model.epochs)


def load_model(path_or_fh) -> SvmModel:
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "r", encoding="utf-8") as fh:
            return load_model(fh)
    fields = {}
    for line in path_or_fh:
        name, _, rest = line.partition(" ")
        fields[name] = rest.split()
    return SvmModel(
        weights=np.array(fields["weights"], dtype=np.float64),
        bias=float(fields["bias"][0]),
        mean=np.array(fields["mean"], dtype=np.float64),
        std=np.array(fields["std"], dtype=np.float64),
        reg_lambda=float(fields["reg_lambda"][0]),
        epochs=int(fields["epochs"][0]),
    )
