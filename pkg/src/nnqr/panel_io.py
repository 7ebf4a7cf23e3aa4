"""CSV ingestion and emission for balanced panels.

Panel schema: header row i,t,y,x1,...,xp; one row per (unit, period) cell;
every unit must be observed in every period. Numeric output uses 17
significant digits so binary doubles round-trip exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .alm import PanelData


class DataError(ValueError):
    """Malformed or unbalanced panel input."""


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def _parse_id(token: str):
    token = token.strip()
    try:
        return (0, int(token))
    except ValueError:
        return (1, token)


def load_panel(path) -> PanelData:
    """Read a balanced panel CSV into N x T matrices.

    Units and periods are ordered by their sorted unique ids; duplicate
    (i, t) pairs, missing cells, missing values and non-numeric cells are
    rejected.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[:3] != ["i", "t", "y"]:
            raise DataError(f"{path}: header must start with i,t,y")
        p = len(header) - 3
        expected = [f"x{j + 1}" for j in range(p)]
        if header[3:] != expected:
            raise DataError(f"{path}: covariate columns must be x1..x{p}")

        cells = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3 + p:
                raise DataError(f"{path}:{lineno}: expected {3 + p} fields")
            key = (_parse_id(row[0]), _parse_id(row[1]))
            if key in cells:
                raise DataError(f"{path}:{lineno}: duplicate (i,t) pair {row[0]},{row[1]}")
            vals = []
            for col, tok in zip(header[2:], row[2:]):
                tok = tok.strip()
                if not tok:
                    raise DataError(f"{path}:{lineno}: missing value in column {col}")
                try:
                    v = float(tok)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric value {tok!r} in column {col}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(f"{path}:{lineno}: non-finite value in column {col}")
                vals.append(v)
            cells[key] = vals

    if not cells:
        raise DataError(f"{path}: no data rows")
    units = sorted({k[0] for k in cells})
    periods = sorted({k[1] for k in cells})
    N, T = len(units), len(periods)
    if len(cells) != N * T:
        for i in units:
            for t in periods:
                if (i, t) not in cells:
                    raise DataError(
                        f"{path}: unbalanced panel, missing cell (i={i[1]}, t={t[1]})"
                    )
    Y = np.empty((N, T))
    X = [np.empty((N, T)) for _ in range(p)]
    for a, i in enumerate(units):
        for b, t in enumerate(periods):
            vals = cells[(i, t)]
            Y[a, b] = vals[0]
            for j in range(p):
                X[j][a, b] = vals[j + 1]
    return PanelData.from_arrays(Y, X)


def save_panel(path, data: PanelData) -> None:
    """Write a PanelData back to the panel CSV schema (unit/period ids 1..N, 1..T)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "t", "y"] + [f"x{j + 1}" for j in range(data.p)])
        for i in range(data.N):
            for t in range(data.T):
                row = [str(i + 1), str(t + 1), fmt17(data.Y[i, t])]
                row += [fmt17(data.X[j][i, t]) for j in range(data.p)]
                w.writerow(row)


def save_matrix(path, M: np.ndarray) -> None:
    """Write a dense matrix as plain CSV rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(M):
            w.writerow([fmt17(v) for v in row])


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [[float(tok) for tok in row] for row in csv.reader(fh) if row]
    return np.asarray(rows, dtype=float)


def save_vector(path, header: Sequence[str], rows) -> None:
    """Write labelled rows, e.g. ('j', 'value') coefficient pairs."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt17(v) for v in row])
