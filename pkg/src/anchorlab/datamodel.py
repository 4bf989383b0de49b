"""Dataset container, anchor dummy-encoding, centering, CSV round-trip.

Datasets are immutable after construction: `center` returns a new object and
records the subtracted means so that prediction on new data can reuse them.
Anchors are not required at prediction time.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    EmptyInput,
    MissingColumn,
    NonNumericPredictor,
    ParseError,
)

FLOAT_FORMAT = "%.12g"


@dataclass(frozen=True)
class AnchorEncoding:
    """How a raw anchor column was turned into numeric columns.

    The full dummy set is kept (one indicator per level, no reference level
    dropped); the rank-truncating QR inside the projection absorbs the
    redundancy after centering.
    """

    kind: str  # "continuous" | "categorical-dummy"
    levels: tuple = ()

    @property
    def width(self) -> int:
        return len(self.levels) if self.kind == "categorical-dummy" else 1


def encode_anchors(labels) -> tuple[np.ndarray, AnchorEncoding]:
    """Dummy-encode per-row categorical labels, columns in sorted label order."""
    labels = list(labels)
    if not labels:
        raise EmptyInput("no rows to encode")
    levels = tuple(sorted({str(lab) for lab in labels}))
    index = {lab: j for j, lab in enumerate(levels)}
    mat = np.zeros((len(labels), len(levels)))
    for i, lab in enumerate(labels):
        mat[i, index[str(lab)]] = 1.0
    return mat, AnchorEncoding(kind="categorical-dummy", levels=levels)


@dataclass(frozen=True)
class AnchorDataset:
    """Observations (X, Y, A) sharing n rows.

    anchor_levels maps a level label to the row indices belonging to it; the
    sets partition the rows when present (discrete anchors only).
    """

    X: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    anchor_levels: dict | None = None
    centered: bool = False
    x_means: np.ndarray | None = None
    y_mean: float = 0.0
    a_means: np.ndarray | None = None
    predictor_names: tuple = field(default=())

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != X.shape[0] and A.shape[1] == X.shape[0]:
            A = A.T
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "A", A)
        n = X.shape[0]
        if Y.shape[0] != n or A.shape[0] != n:
            raise ValueError(
                f"row mismatch: X has {n}, Y has {Y.shape[0]}, A has {A.shape[0]}"
            )
        if not self.predictor_names:
            object.__setattr__(
                self,
                "predictor_names",
                tuple(f"x{j + 1}" for j in range(X.shape[1])),
            )
        if self.anchor_levels is not None:
            covered = np.concatenate(
                [np.asarray(ix) for ix in self.anchor_levels.values()]
            )
            if len(covered) != n or len(np.unique(covered)) != n:
                raise ValueError("anchor level index sets must partition the rows")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.A.shape[1]


def center(ds: AnchorDataset) -> AnchorDataset:
    """Subtract column means from X, Y and A; store them for prediction."""
    if ds.n < 2:
        raise ValueError("centering needs at least two rows")
    x_means = ds.X.mean(axis=0)
    y_mean = float(ds.Y.mean())
    a_means = ds.A.mean(axis=0)
    if ds.centered:
        # idempotent: previously stored means are kept
        return ds
    return replace(
        ds,
        X=ds.X - x_means,
        Y=ds.Y - y_mean,
        A=ds.A - a_means,
        centered=True,
        x_means=x_means,
        y_mean=y_mean,
        a_means=a_means,
    )


def _parse_cell(text: str, row: int, col: str, kind: str) -> float:
    try:
        return float(text)
    except ValueError:
        exc = NonNumericPredictor if kind == "predictor" else ParseError
        raise exc(
            f"cannot parse {kind} cell at row {row}, column {col!r}: {text!r}",
            row=row,
            column=col,
        ) from None


def load_column_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_csv(path, config: dict) -> AnchorDataset:
    """Strictly parse a CSV file into an AnchorDataset.

    `config` names the `response` column and the `anchors` (list of
    {"name", "kind"}); all remaining numeric columns except `drop_columns`
    become predictors. Row order is preserved; missing values are an error.
    """
    response = config["response"]
    anchor_specs = config.get("anchors", [])
    drop = set(config.get("drop_columns", []))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=0) from None
        rows = list(reader)
    if not rows:
        raise ParseError("no data rows", row=1)
    colidx = {name: j for j, name in enumerate(header)}
    anchor_names = [spec["name"] for spec in anchor_specs]
    for name in [response, *anchor_names]:
        if name not in colidx:
            raise MissingColumn(name)
    predictor_names = [
        name
        for name in header
        if name != response and name not in anchor_names and name not in drop
    ]

    y = np.array(
        [
            _parse_cell(row[colidx[response]], i + 1, response, "response")
            for i, row in enumerate(rows)
        ]
    )
    X = np.empty((len(rows), len(predictor_names)))
    for j, name in enumerate(predictor_names):
        cix = colidx[name]
        for i, row in enumerate(rows):
            X[i, j] = _parse_cell(row[cix], i + 1, name, "predictor")

    a_blocks = []
    anchor_levels = None
    for spec in anchor_specs:
        name, kind = spec["name"], spec.get("kind", "continuous")
        cix = colidx[name]
        if kind == "categorical":
            labels = [row[cix] for row in rows]
            block, enc = encode_anchors(labels)
            a_blocks.append(block)
            if len(anchor_specs) == 1:
                anchor_levels = {
                    lev: np.flatnonzero(block[:, j]) for j, lev in enumerate(enc.levels)
                }
        else:
            a_blocks.append(
                np.array(
                    [
                        _parse_cell(row[cix], i + 1, name, "anchor")
                        for i, row in enumerate(rows)
                    ]
                )[:, None]
            )
    if not a_blocks:
        raise MissingColumn("at least one anchor column is required")
    A = np.hstack(a_blocks)
    return AnchorDataset(
        X=X,
        Y=y,
        A=A,
        anchor_levels=anchor_levels,
        predictor_names=tuple(predictor_names),
    )


def write_csv(path, ds: AnchorDataset, anchor_labels=None) -> None:
    """Inverse of read_csv for numeric data, 12 significant digits."""
    header = ["y", *ds.predictor_names]
    if anchor_labels is not None:
        header.append("env")
    else:
        header.extend(f"a{j + 1}" for j in range(ds.q))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [FLOAT_FORMAT % ds.Y[i]]
            row.extend(FLOAT_FORMAT % v for v in ds.X[i])
            if anchor_labels is not None:
                row.append(str(anchor_labels[i]))
            else:
                row.extend(FLOAT_FORMAT % v for v in ds.A[i])
            writer.writerow(row)


def from_levels(X, Y, labels) -> AnchorDataset:
    """Build a discrete-anchor dataset from per-row level labels."""
    A, enc = encode_anchors(labels)
    levels = {
        lev: np.flatnonzero(A[:, j]) for j, lev in enumerate(enc.levels)
    }
    return AnchorDataset(X=X, Y=Y, A=A, anchor_levels=levels)
