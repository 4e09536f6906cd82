"""Writers for the scanner's on-disk interchange formats.

Implemented against the documented wire formats (not the scanner's own code)
so this package couples to the primary tool only through its external
interfaces. ACTS: "ACTS" magic, u32 LE version=1, u32 LE n_rows, u32 LE
n_cols, then row-major float32 LE values.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sIII")


class ActsWriter:
    """Incremental row-major ACTS writer; row count is declared up front.

    Streams batches to a sibling temp file and renames on a complete close,
    so an aborted run never leaves a partial .acts behind.
    """

    def __init__(self, path, n_rows: int, n_cols: int):
        self.path = Path(path)
        self.n_rows = n_rows
        self.n_cols = n_cols
        self._written = 0
        self._tmp = self.path.with_name(self.path.name + ".tmp")
        self._fh = open(self._tmp, "wb")
        self._fh.write(_HEADER.pack(b"ACTS", 1, n_rows, n_cols))

    def append(self, rows: np.ndarray) -> None:
        rows = np.ascontiguousarray(rows, dtype="<f4")
        if rows.ndim != 2 or rows.shape[1] != self.n_cols:
            raise ValueError(f"expected (*, {self.n_cols}) rows, got {rows.shape}")
        if not np.isfinite(rows).all():
            raise ValueError("refusing to write non-finite activations")
        self._written += rows.shape[0]
        if self._written > self.n_rows:
            raise ValueError("more rows appended than declared")
        self._fh.write(rows.tobytes())

    def close(self) -> None:
        self._fh.close()
        if self._written != self.n_rows:
            self._tmp.unlink(missing_ok=True)
            raise ValueError(
                f"declared {self.n_rows} rows but wrote {self._written}"
            )
        self._tmp.replace(self.path)

    def abort(self) -> None:
        self._fh.close()
        self._tmp.unlink(missing_ok=True)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()


def read_acts(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, version, n_rows, n_cols = _HEADER.unpack_from(raw)
    if magic != b"ACTS" or version != 1:
        raise ValueError(f"{path}: not an ACTS v1 file")
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return values.reshape(n_rows, n_cols)


def write_layout(path, layers, node_order: str = "channel-major,row-major") -> None:
    doc = {
        "layers": [{"name": name, "size": int(size)} for name, size in layers],
        "node_order": node_order,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
