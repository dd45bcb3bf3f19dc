"""CSV ingestion and synthetic hierarchical datasets."""

import math
import os
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from .errors import InvalidArgument, ParseError


@dataclass
class Dataset:
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    names: Optional[List[str]] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise InvalidArgument(f"features must be a non-empty (N, p) matrix, got {self.features.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.features.shape[0],):
                raise InvalidArgument("labels must have one entry per row")


def factorize(values):
    """Map arbitrary labels to 0, 1, ... in order of first appearance."""
    mapping = {}
    return np.array([mapping.setdefault(v, len(mapping)) for v in values], dtype=np.int64)


def _resolve_label_column(label_column, header, width):
    if label_column is None:
        return None
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.lstrip("-").isdigit()):
        idx = int(label_column)
        if idx < 0:
            idx += width
        if not 0 <= idx < width:
            raise InvalidArgument(f"label column index {label_column} out of range for {width} columns")
        return idx
    if header is None:
        raise InvalidArgument(f"label column {label_column!r} given by name but the file has no header")
    if label_column not in header:
        raise InvalidArgument(f"label column {label_column!r} not found in header {header}")
    return header.index(label_column)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _looks_like_header(cells, label_column):
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        return True
    skip = None
    if label_column is not None:
        skip = int(label_column) % len(cells)
    return any(not _is_number(cell) for j, cell in enumerate(cells) if j != skip)


def load_csv(path, label_column: Union[int, str, None] = None, has_header: Optional[bool] = False) -> Dataset:
    """Read a comma-separated numeric table.

    ``label_column`` (index, negative index or header name) is split off and
    factorized; every other cell must parse as a float. ``has_header=None``
    treats the first row as a header when one of its feature cells is not a
    number (or when the label column is given by name). Raises
    :class:`FileNotFoundError` for a missing file and :class:`ParseError`
    (with 1-based line number) for ragged rows or non-numeric cells.
    """
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.replace("\r\n", "\n").split("\n")

    header = None
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cells = [cell.strip() for cell in line.split(",")]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"{path}: line {lineno} has {len(cells)} fields, expected {width}", line=lineno
            )
        if has_header is None:
            has_header = _looks_like_header(cells, label_column)
        if has_header and header is None:
            header = cells
            continue
        rows.append((lineno, cells))
    if not rows:
        raise ParseError(f"{path}: no data rows")

    label_idx = _resolve_label_column(label_column, header, width)
    feature_cols = [j for j in range(width) if j != label_idx]
    features = np.empty((len(rows), len(feature_cols)))
    raw_labels = []
    for i, (lineno, cells) in enumerate(rows):
        for k, j in enumerate(feature_cols):
            try:
                features[i, k] = float(cells[j])
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}, column {j + 1}: not a number: {cells[j]!r}",
                    line=lineno,
                    column=j + 1,
                ) from None
        if label_idx is not None:
            raw_labels.append(cells[label_idx])

    names = [header[j] for j in feature_cols] if header is not None else None
    labels = factorize(raw_labels) if label_idx is not None else None
    return Dataset(features, labels, names)


def save_csv(path, dataset: Dataset, label_name="label"):
    """Write features (17 significant digits, so floats round-trip) plus an optional label column."""
    p = dataset.features.shape[1]
    names = dataset.names or [f"x{j}" for j in range(p)]
    header = list(names) + ([label_name] if dataset.labels is not None else [])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in enumerate(dataset.features):
            cells = [repr(float(v)) if math.isfinite(v) else str(v) for v in row]
            if dataset.labels is not None:
                cells.append(str(int(dataset.labels[i])))
            fh.write(",".join(cells) + "\n")


def _spread_centers(rng, count, around, min_sep, radius, p, on_sphere=False, max_tries=10000):
    """Rejection-sample ``count`` centers pairwise >= ``min_sep`` apart.

    Centers lie within ``radius`` of ``around``, or exactly at that distance
    when ``on_sphere`` is set.
    """
    centers = []
    tries = 0
    while len(centers) < count:
        tries += 1
        if tries > max_tries:
            raise InvalidArgument(
                f"cannot place {count} centers {min_sep} apart in {p} dimensions; "
                "lower the count or raise the dimension"
            )
        direction = rng.normal(size=p)
        direction /= np.linalg.norm(direction)
        r = radius if on_sphere else radius * rng.uniform() ** (1.0 / p)
        cand = around + direction * r
        if all(np.linalg.norm(cand - other) >= min_sep for other in centers):
            centers.append(cand)
    return np.array(centers)


def make_hierarchical(
    num_root: int = 2,
    children_per_root: int = 2,
    points_per_leaf: int = 75,
    leaf_spread: float = 0.05,
    level_gap: float = 4.0,
    p: int = 2,
    seed: int = 42,
) -> Dataset:
    """Two-level tree of Gaussian clouds.

    Root centers are pairwise at least ``level_gap`` apart. Each root has
    ``children_per_root`` child centers at distance ``level_gap / 4`` from it,
    pairwise at least ``level_gap / 4`` apart. Every child (leaf) gets
    ``points_per_leaf`` points with isotropic noise of scale ``leaf_spread``.
    Labels are leaf indices, root-major.
    """
    for name, value in (("num_root", num_root), ("children_per_root", children_per_root),
                        ("points_per_leaf", points_per_leaf), ("p", p)):
        if int(value) != value or value < 1:
            raise InvalidArgument(f"{name} must be an integer >= 1, got {value!r}")
    if not (leaf_spread > 0 and level_gap > 0):
        raise InvalidArgument("leaf_spread and level_gap must be positive")

    rng = np.random.default_rng(seed)
    roots = _spread_centers(rng, num_root, np.zeros(p), level_gap, level_gap * num_root, p)
    features = []
    labels = []
    leaf = 0
    for root in roots:
        child_gap = level_gap / 4.0
        kids = _spread_centers(rng, children_per_root, root, child_gap, child_gap, p, on_sphere=True)
        for kid in kids:
            features.append(kid + leaf_spread * rng.normal(size=(points_per_leaf, p)))
            labels.extend([leaf] * points_per_leaf)
            leaf += 1
    return Dataset(np.vstack(features), np.array(labels))
