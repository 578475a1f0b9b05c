"""CSV schemas produced by the simulator, and a strict loader for them.

The simulator's batch tool is the only writer of these files, so headers
are matched exactly: a mismatched header means the wrong file, not a
recoverable variation.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

TIMESERIES_COLUMNS = (
    "t",
    "s_vn",
    "n_bath_mean",
    "n_bath_var",
    "e_sys",
    "m_sys",
    "s_b_sys",
    "s_b_bath",
    "disc_weight",
    "chi_used",
)
PROFILE_COLUMNS = ("t", "site", "density")
OVERLAP_COLUMNS = ("energy", "weight")

# table kind -> full column tuple
SCHEMAS = {
    "timeseries": TIMESERIES_COLUMNS,
    "profiles": PROFILE_COLUMNS,
    "overlap": OVERLAP_COLUMNS,
}


def load_table(path: str | Path, kind: str) -> dict[str, np.ndarray]:
    """Read one CSV artifact into float columns, strictly validated.

    Raises ValueError for an unknown kind, a header that is not exactly the
    schema, or a file with no data rows.  'nan' cells become np.nan.
    """
    if kind not in SCHEMAS:
        raise ValueError(f"unknown table kind {kind!r}")
    expected = SCHEMAS[kind]
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        if tuple(header) != expected:
            raise ValueError(
                f"{path} does not carry the {kind} schema "
                f"(header {','.join(header)!r})"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path} has a header but no data rows")
    data = np.array([[float(cell) for cell in row] for row in rows])
    return {name: data[:, i] for i, name in enumerate(expected)}


def table_kind_for_column(column: str) -> str:
    for kind, columns in SCHEMAS.items():
        if column in columns:
            return kind
    raise ValueError(f"column {column!r} appears in no known CSV schema")
