"""Event stream parsing, validation, and binning into binary 3rd-order tensors.

An event is a (i, j, t) triple: row pixel, column pixel, microsecond
timestamp, optionally tagged with a small-integer class label (objects get
ids 0, 1, ...; background noise is labeled -1). A recording over an I x J
sensor becomes a binary (I, J, N) tensor by cutting the recording's time
range into N near-equal integer-width bins and setting entry (i, j, n) to 1
when at least one event hit pixel (i, j) during bin n.

Canonical interchange format is CSV with header ``t,i,j[,label][,polarity]``
(decimal integers, one event per line); a trailing polarity column is
accepted and ignored.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyStreamError, EventParseError, GeometryError

logger = logging.getLogger(__name__)

NOISE_LABEL = -1

_KNOWN_COLUMNS = ("t", "i", "j", "label", "polarity")


@dataclass(frozen=True)
class Event:
    """One sensor event."""

    i: int
    j: int
    t: int
    label: int | None = None


@dataclass
class EventStream:
    """A time-sorted event recording over a fixed sensor geometry.

    `t_min`/`t_max` default to the event extremes but may be declared wider
    (the recording window can start before the first event and end after the
    last one).
    """

    i: np.ndarray
    j: np.ndarray
    t: np.ndarray
    geometry: tuple[int, int]
    labels: np.ndarray | None = None
    t_min: int = field(default=None)  # type: ignore[assignment]
    t_max: int = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.int64)
        self.j = np.asarray(self.j, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != self.t.shape:
                raise ValueError("labels must align with events")
        if not (self.i.shape == self.j.shape == self.t.shape):
            raise ValueError("i, j, t arrays must have equal length")
        if len(self.t) == 0:
            raise EmptyStreamError("a stream with zero events cannot be processed")
        rows, cols = self.geometry
        if self.i.min() < 0 or self.i.max() >= rows:
            raise GeometryError(f"row index outside [0, {rows})")
        if self.j.min() < 0 or self.j.max() >= cols:
            raise GeometryError(f"column index outside [0, {cols})")
        if self.t.min() < 0:
            raise ValueError("timestamps must be non-negative")
        # enforce time ordering (stable, so equal timestamps keep input order)
        order = np.argsort(self.t, kind="stable")
        if not np.array_equal(order, np.arange(len(order))):
            self.i = self.i[order]
            self.j = self.j[order]
            self.t = self.t[order]
            if self.labels is not None:
                self.labels = self.labels[order]
        if self.t_min is None:
            self.t_min = int(self.t[0])
        if self.t_max is None:
            self.t_max = int(self.t[-1])
        self.t_min = int(self.t_min)
        self.t_max = int(self.t_max)
        if self.t_min > int(self.t[0]) or self.t_max < int(self.t[-1]):
            raise ValueError("declared [t_min, t_max] must cover all event timestamps")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def has_labels(self) -> bool:
        return self.labels is not None


@dataclass
class EventTensor:
    """Dense binary (I, J, N) tensor plus the bin edges that produced it."""

    data: np.ndarray
    bin_edges: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        self.bin_edges = np.asarray(self.bin_edges, dtype=np.int64)
        if self.data.ndim != 3:
            raise ValueError("event tensor must be 3rd-order")
        if not np.isin(self.data, (0, 1)).all():
            raise ValueError("event tensor entries must be exactly 0 or 1")
        if len(self.bin_edges) != self.data.shape[2] + 1:
            raise ValueError("bin_edges must have N+1 entries")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin_edges must be strictly increasing")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


def parse_events(source, geometry: tuple[int, int]) -> EventStream:
    """Parse the canonical event CSV into a validated, time-sorted stream.

    `source` is a path, a text stream, or bytes. Raises EventParseError with
    the offending line number on malformed records, GeometryError on
    out-of-bounds coordinates, EmptyStreamError when no events are present.
    """
    if isinstance(source, (str, bytes)) and not _looks_like_inline_csv(source):
        with open(source, "r", encoding="utf-8") as fh:
            return parse_events(fh, geometry)
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)

    header_line = source.readline()
    if not header_line.strip():
        raise EmptyStreamError("empty source: no header, no events")
    columns = [c.strip().lower() for c in header_line.strip().split(",")]
    for c in columns:
        if c not in _KNOWN_COLUMNS:
            raise EventParseError(1, f"unknown column {c!r} (expected t,i,j[,label][,polarity])")
    for required in ("t", "i", "j"):
        if required not in columns:
            raise EventParseError(1, f"missing required column {required!r}")
    idx = {c: k for k, c in enumerate(columns)}
    want_label = "label" in idx

    tt, ii, jj, labels = [], [], [], []
    for line_no, line in enumerate(source, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise EventParseError(line_no, f"expected {len(columns)} fields, got {len(parts)}")
        try:
            t = int(parts[idx["t"]])
            i = int(parts[idx["i"]])
            j = int(parts[idx["j"]])
            label = int(parts[idx["label"]]) if want_label else None
        except ValueError as exc:
            raise EventParseError(line_no, f"non-integer field ({exc})") from None
        if t < 0:
            raise EventParseError(line_no, f"negative timestamp {t}")
        rows, cols = geometry
        if not (0 <= i < rows):
            raise GeometryError(f"line {line_no}: i={i} outside geometry rows [0, {rows})")
        if not (0 <= j < cols):
            raise GeometryError(f"line {line_no}: j={j} outside geometry cols [0, {cols})")
        tt.append(t)
        ii.append(i)
        jj.append(j)
        if want_label:
            labels.append(label)

    if not tt:
        raise EmptyStreamError("source contains a header but zero events")
    return EventStream(
        i=np.array(ii), j=np.array(jj), t=np.array(tt),
        geometry=geometry,
        labels=np.array(labels) if want_label else None,
    )


def _looks_like_inline_csv(source) -> bool:
    if isinstance(source, bytes):
        return not source or b"\n" in source or b"," in source
    return not source or "\n" in source or "," in source


def write_events_csv(stream: EventStream, path_or_fh) -> None:
    """Write a stream in the canonical CSV format (label column when present)."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            write_events_csv(stream, fh)
            return
    fh = path_or_fh
    if stream.has_labels:
        fh.write("t,i,j,label\n")
        for t, i, j, lab in zip(stream.t, stream.i, stream.j, stream.labels):
            fh.write(f"{t},{i},{j},{lab}\n")
    else:
        fh.write("t,i,j\n")
        for t, i, j in zip(stream.t, stream.i, stream.j):
            fh.write(f"{t},{i},{j}\n")


def compute_bin_edges(t_min: int, t_max: int, n_bins: int) -> np.ndarray:
    """N+1 strictly increasing integer edges cutting [t_min, t_max] into
    near-equal widths (remainder spread over the leading bins, widths within
    one time unit of each other)."""
    if n_bins <= 0:
        raise ValueError(f"segment count must be positive, got {n_bins}")
    span = t_max - t_min
    if span < n_bins:
        raise ValueError(
            f"time range {span} is too narrow to cut {n_bins} positive-width bins"
        )
    width, rem = divmod(span, n_bins)
    k = np.arange(n_bins + 1, dtype=np.int64)
    return t_min + k * width + np.minimum(k, rem)


def bin_indices(t: np.ndarray, bin_edges: np.ndarray) -> np.ndarray:
    """Map timestamps to bins: half-open [edge_k, edge_{k+1}) with the last bin
    closed on the right so t_max lands in bin N-1."""
    t = np.asarray(t, dtype=np.int64)
    if t.min() < bin_edges[0] or t.max() > bin_edges[-1]:
        raise ValueError("timestamp outside the binned range")
    idx = np.searchsorted(bin_edges, t, side="right") - 1
    return np.minimum(idx, len(bin_edges) - 2)


def bin_to_tensor(stream: EventStream, n_bins: int) -> EventTensor:
    """Binarize a stream into an (I, J, N) tensor over [t_min, t_max]."""
    edges = compute_bin_edges(stream.t_min, stream.t_max, n_bins)
    rows, cols = stream.geometry
    data = np.zeros((rows, cols, n_bins), dtype=np.uint8)
    n = bin_indices(stream.t, edges)
    data[stream.i, stream.j, n] = 1
    return EventTensor(data=data, bin_edges=edges)


def tensor_density(tensor: EventTensor) -> float:
    """Fraction of 1-entries."""
    return float(np.count_nonzero(tensor.data)) / tensor.data.size


def write_tensor_dump(tensor: EventTensor | np.ndarray, path_or_fh) -> None:
    """Debug/oracle dump: header ``I J N`` then the 0/1 values in
    (n outer, i middle, j inner) order."""
    data = tensor.data if isinstance(tensor, EventTensor) else np.asarray(tensor)
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            write_tensor_dump(data, fh)
            return
    fh = path_or_fh
    rows, cols, n_bins = data.shape
    fh.write(f"{rows} {cols} {n_bins}\n")
    flat = data.transpose(2, 0, 1).reshape(n_bins * rows, cols)
    for row in flat:
        fh.write(" ".join(str(int(v)) for v in row))
        fh.write("\n")


def read_tensor_dump(path_or_fh) -> np.ndarray:
    """Inverse of :func:`write_tensor_dump`; returns the uint8 data array."""
    if isinstance(path_or_fh, str):
        with open(path_or_fh, "r", encoding="utf-8") as fh:
            return read_tensor_dump(fh)
    fh = path_or_fh
    rows, cols, n_bins = (int(v) for v in fh.readline().split())
    values = np.array(fh.read().split(), dtype=np.uint8)
    if values.size != rows * cols * n_bins:
        raise ValueError(f"dump holds {values.size} values, expected {rows * cols * n_bins}")
    return np.ascontiguousarray(values.reshape(n_bins, rows, cols).transpose(1, 2, 0))
