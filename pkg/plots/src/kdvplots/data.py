"""Reader for the exported plot-data CSV schema.

Each export carries one leading comment line of key=value metadata
(scenario hash, file kind, optional extras such as the band pattern),
then a header row naming the columns, then data rows.  Empty fields
mark quantities undefined in a sample's region and read as NaN.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["SpecError", "Table", "read_table"]


class SpecError(ValueError):
    """A plot spec references a kind, file, or column that does not exist."""


@dataclass(frozen=True)
class Table:
    path: Path
    meta: dict
    columns: tuple
    rows: tuple

    def column(self, name, numeric=True):
        """One column by header name; floats with NaN for empty fields."""
        if name not in self.columns:
            raise SpecError(f"{self.path.name}: missing column {name!r} "
                            f"(has {', '.join(self.columns)})")
        i = self.columns.index(name)
        vals = [row[i] if i < len(row) else "" for row in self.rows]
        if not numeric:
            return vals
        return np.array([float(v) if v != "" else np.nan for v in vals])


def read_table(path) -> Table:
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"missing input file: {path}")
    meta, columns, rows = {}, None, []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec:
                continue
            if rec[0].lstrip().startswith("#"):
                for token in ",".join(rec).lstrip("# ").split():
                    if "=" in token:
                        key, val = token.split("=", 1)
                        meta[key] = val
                continue
            if columns is None:
                columns = tuple(rec)
                continue
            rows.append(tuple(rec))
    if columns is None:
        raise SpecError(f"{path.name}: no column header row")
    return Table(path=path, meta=meta, columns=columns, rows=tuple(rows))
