"""Synthetic datasets, CSV I/O and mini-batch sampling."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, InvalidData, InvalidInput, ParseError


@dataclass
class DataMatrix:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.ndim != 2:
            raise InvalidInput(f"points must be 2-D, got shape {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise InvalidData("points contain non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.points.shape[0],):
                raise InvalidInput(
                    f"labels length {self.labels.shape} does not match n={self.points.shape[0]}"
                )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "DataMatrix":
        labels = None if self.labels is None else self.labels[idx]
        return DataMatrix(self.points[idx], labels)


# ---------------------------------------------------------------- generators

def _split_counts(n: int) -> tuple[int, int]:
    if n < 2:
        raise InvalidConfig(f"need n >= 2 points, got {n}")
    return n // 2, n - n // 2


def _finish(points, labels, rng) -> DataMatrix:
    perm = rng.permutation(len(labels))
    return DataMatrix(points[perm], labels[perm])


def gen_double_rings(n: int, radii=(6.0, 18.0), noise: float = 0.6, seed: int = 0) -> DataMatrix:
    """Two concentric circles with isotropic Gaussian noise; label = ring index (0 inner)."""
    r_in, r_out = map(float, radii)
    if r_in <= 0 or r_out <= 0 or r_in >= r_out:
        raise InvalidConfig(f"radii must satisfy 0 < inner < outer, got {radii}")
    if noise < 0:
        raise InvalidConfig(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    n0, n1 = _split_counts(n)
    pts, labels = [], []
    for lab, (count, r) in enumerate(((n0, r_in), (n1, r_out))):
        theta = rng.uniform(0.0, 2.0 * np.pi, count)
        pts.append(r * np.column_stack([np.cos(theta), np.sin(theta)]))
        labels.append(np.full(count, lab))
    points = np.vstack(pts)
    if noise > 0:
        points = points + noise * rng.standard_normal(points.shape)
    return _finish(points, np.concatenate(labels), rng)


# center of the second arc, in units of `scale`
DOUBLE_C_OFFSET = (0.75, 1.0)
DOUBLE_C_SPAN = 1.5 * np.pi


def double_c_centers(scale: float) -> np.ndarray:
    return np.array([[0.0, 0.0], [DOUBLE_C_OFFSET[0] * scale, DOUBLE_C_OFFSET[1] * scale]])


def gen_double_c(n: int, scale: float = 15.0, noise: float = 0.6, seed: int = 0) -> DataMatrix:
    """Two interlocking C-shaped arcs of radius ``scale``.

    Arc 0 spans angles [pi/4, 7pi/4] around the origin (opening towards +x).
    Arc 1 is arc 0 rotated by pi about its own center, which sits at
    ``(0.75, 1.0) * scale``; the two arcs never come closer than about 0.7 * scale.
    """
    if not scale > 0:
        raise InvalidConfig(f"scale must be positive, got {scale}")
    if noise < 0:
        raise InvalidConfig(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    centers = double_c_centers(scale)
    pts, labels = [], []
    for lab, count in enumerate(_split_counts(n)):
        theta = rng.uniform(np.pi / 4, np.pi / 4 + DOUBLE_C_SPAN, count) + lab * np.pi
        pts.append(centers[lab] + scale * np.column_stack([np.cos(theta), np.sin(theta)]))
        labels.append(np.full(count, lab))
    points = np.vstack(pts)
    if noise > 0:
        points = points + noise * rng.standard_normal(points.shape)
    return _finish(points, np.concatenate(labels), rng)


# ---------------------------------------------------------------- file I/O

def atomic_write_text(path, text: str) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt_float(x) -> str:
    return "%.17g" % x


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def save_csv(data: DataMatrix, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"x{j}" for j in range(data.d)]
    if data.labels is not None:
        header.append("label")
    writer.writerow(header)
    for i in range(data.n):
        row = [fmt_float(v) for v in data.points[i]]
        if data.labels is not None:
            row.append(str(int(data.labels[i])))
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def load_csv(path) -> DataMatrix:
    """Read points (and an optional trailing ``label`` column) from a CSV file.

    A first line that does not parse as numbers is treated as a header.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidInput(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1) if row]
    if not rows:
        raise ParseError("file is empty", path=path)

    has_labels = False
    first_line, first = rows[0]
    if not all(_is_number(f) for f in first):
        has_labels = first[-1].strip().lower() == "label"
        width = len(first)
        rows = rows[1:]
    else:
        width = len(first)
    if not rows:
        raise ParseError("no data rows", path=path)

    values = np.empty((len(rows), width), dtype=np.float64)
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", line=lineno, path=path)
        try:
            values[r] = [float(f) for f in row]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
    if not np.all(np.isfinite(values)):
        raise InvalidData(f"{path}: non-finite values")
    if has_labels:
        labels = values[:, -1]
        if np.any(labels != np.round(labels)):
            raise ParseError("label column must hold integers", path=path)
        return DataMatrix(values[:, :-1], labels.astype(np.int64))
    return DataMatrix(values)


def save_labels(labels, path) -> None:
    atomic_write_text(path, "".join(f"{int(v)}\n" for v in labels))


def load_labels(path) -> np.ndarray:
    """Labels file: one integer per line. A CSV with a ``label`` column is accepted too."""
    path = Path(path)
    if not path.is_file():
        raise InvalidInput(f"no such file: {path}")
    with open(path) as fh:
        lines = [(i, ln.strip()) for i, ln in enumerate(fh, start=1) if ln.strip()]
    if lines and "," in lines[0][1]:
        data = load_csv(path)
        if data.labels is None:
            raise ParseError("CSV file has no label column", path=path)
        return data.labels
    out = []
    for lineno, text in lines:
        try:
            out.append(int(text))
        except ValueError:
            if lineno == lines[0][0]:
                continue  # header
            raise ParseError(f"not an integer: {text!r}", line=lineno, path=path) from None
    return np.asarray(out, dtype=np.int64)


# ---------------------------------------------------------------- sampling

class BatchSampler:
    """Shuffled mini-batches without replacement; a fresh permutation each epoch."""

    def __init__(self, n: int, batch_size: int, seed: int = 0):
        if batch_size < 1:
            raise InvalidConfig(f"batch size must be >= 1, got {batch_size}")
        if n < 1:
            raise InvalidConfig(f"need n >= 1, got {n}")
        self.n = n
        self.batch_size = min(batch_size, n)
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self.epoch = 0
        self.order = self._rng.permutation(n)
        self._pos = 0

    @property
    def batches_per_epoch(self) -> int:
        return -(-self.n // self.batch_size)

    def _reshuffle(self):
        self.epoch += 1
        self.order = self._rng.permutation(self.n)
        self._pos = 0

    def next_indices(self) -> np.ndarray:
        if self._pos >= self.n:
            self._reshuffle()
        idx = self.order[self._pos:self._pos + self.batch_size]
        self._pos += len(idx)
        return idx

    def next_batch(self, X):
        X = X.points if isinstance(X, DataMatrix) else np.asarray(X)
        idx = self.next_indices()
        return idx, X[idx]

    def epoch_batches(self):
        """Index arrays for one epoch (the rest of the current one if it is under way)."""
        if self._pos >= self.n:
            self._reshuffle()
        while self._pos < self.n:
            yield self.next_indices()
