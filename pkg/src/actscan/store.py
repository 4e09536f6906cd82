"""Activation matrices, network layout metadata, and their on-disk formats.

Activations are stored and serialized as 32-bit IEEE-754 little-endian values
(the precision they come out of a network with); all downstream statistics are
computed in 64-bit. Loaded stores are immutable and safe for concurrent reads.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ACTS_MAGIC = b"ACTS"
ACTS_VERSION = 1
_ACTS_HEADER = struct.Struct("<4sIII")  # magic, version, n_rows, n_cols


class StoreError(Exception):
    """Base class for activation-store failures."""


class BadMagicError(StoreError):
    """File does not start with the ACTS magic bytes."""


class BadVersionError(StoreError):
    """ACTS file declares an unsupported format version."""


class TruncatedPayloadError(StoreError):
    """ACTS file ends before the declared number of values."""


class TrailingDataError(StoreError):
    """ACTS file contains bytes beyond the declared payload."""


class NonFiniteValuesError(StoreError):
    """Matrix contains NaN or infinite entries."""


class EmptyMatrixError(StoreError):
    """Matrix has zero rows or zero columns."""


class LayoutError(StoreError):
    """Layout file is malformed or internally inconsistent."""


class CsvImportError(StoreError):
    """CSV activation file could not be parsed."""


class DimensionMismatchError(Exception):
    """Shapes of two collaborating inputs disagree."""


def _atomic_write_bytes(path, payload: bytes) -> None:
    # Write to a temp file in the same directory and rename, so a failed run
    # never leaves a partial artifact behind.
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def load_acts(path) -> np.ndarray:
    """Read an ACTS file into a read-only float32 matrix.

    Raises a distinct StoreError subclass for each failure mode: bad magic,
    unsupported version, truncated payload, trailing bytes, empty dimensions,
    and non-finite entries.
    """
    raw = Path(path).read_bytes()
    if raw[:4] != ACTS_MAGIC:
        raise BadMagicError(f"{path}: not an ACTS file (bad magic {raw[:4]!r})")
    if len(raw) < _ACTS_HEADER.size:
        raise TruncatedPayloadError(f"{path}: incomplete header ({len(raw)} bytes)")
    _, version, n_rows, n_cols = _ACTS_HEADER.unpack_from(raw)
    if version != ACTS_VERSION:
        raise BadVersionError(f"{path}: unsupported ACTS version {version}")
    if n_rows == 0 or n_cols == 0:
        raise EmptyMatrixError(f"{path}: declares {n_rows}x{n_cols} matrix")
    expected = n_rows * n_cols * 4
    actual = len(raw) - _ACTS_HEADER.size
    if actual < expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {actual // 4} of {n_rows * n_cols} values"
        )
    if actual > expected:
        raise TrailingDataError(f"{path}: {actual - expected} bytes past payload")
    values = np.frombuffer(raw, dtype="<f4", offset=_ACTS_HEADER.size)
    values = values.reshape(n_rows, n_cols)
    if not np.isfinite(values).all():
        raise NonFiniteValuesError(f"{path}: matrix contains NaN or Inf entries")
    values.flags.writeable = False
    return values


def save_acts(path, values) -> None:
    """Write a matrix as an ACTS file (atomically).

    Values are stored as little-endian float32; a float32 matrix round-trips
    bit-exactly through save/load.
    """
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise EmptyMatrixError(f"refusing to write empty {arr.shape} matrix")
    if not np.isfinite(arr).all():
        raise NonFiniteValuesError("refusing to write NaN or Inf entries")
    header = _ACTS_HEADER.pack(ACTS_MAGIC, ACTS_VERSION, arr.shape[0], arr.shape[1])
    _atomic_write_bytes(path, header + arr.tobytes())


def import_csv(path) -> np.ndarray:
    """Parse a headerless CSV of activations (one input per row) to float32.

    Convenience importer; ACTS is the canonical interchange format.
    """
    try:
        values = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except (ValueError, OSError) as exc:
        raise CsvImportError(f"{path}: {exc}") from exc
    if values.size == 0:
        raise EmptyMatrixError(f"{path}: no data rows")
    if not np.isfinite(values).all():
        raise NonFiniteValuesError(f"{path}: contains NaN or Inf entries")
    return values.astype(np.float32)


@dataclass(frozen=True)
class NetworkLayout:
    """Ordered, named partition of the node axis into layers.

    Column c belongs to the unique layer whose cumulative-size interval
    contains c, with layers taken in listed order.
    """

    layers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not self.layers:
            raise LayoutError("layout must contain at least one layer")
        names = [name for name, _ in self.layers]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate layer names in {names}")
        for name, size in self.layers:
            if not isinstance(size, int) or size <= 0:
                raise LayoutError(f"layer {name!r} has nonpositive size {size}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.layers)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(size for _, size in self.layers)

    @property
    def total_nodes(self) -> int:
        return sum(self.sizes)

    def _offsets(self) -> np.ndarray:
        # Cumulative layer ends: layer k owns [offsets[k-1], offsets[k]).
        return np.cumsum(self.sizes)

    def node_to_layer(self, col: int) -> str:
        """Name of the layer owning column `col`."""
        if not 0 <= col < self.total_nodes:
            raise IndexError(f"node index {col} outside [0, {self.total_nodes})")
        k = int(np.searchsorted(self._offsets(), col, side="right"))
        return self.layers[k][0]

    def layer_columns(self, name: str) -> np.ndarray:
        """Ascending column indices belonging to one layer."""
        ends = self._offsets()
        for k, (layer_name, _) in enumerate(self.layers):
            if layer_name == name:
                start = 0 if k == 0 else int(ends[k - 1])
                return np.arange(start, int(ends[k]))
        raise LayoutError(f"unknown layer {name!r}")

    def columns_for(self, names) -> np.ndarray:
        """Ascending column indices for a set of layer names."""
        cols = [self.layer_columns(name) for name in sorted(names)]
        return np.sort(np.concatenate(cols))

    def check_matrix(self, n_cols: int) -> None:
        if n_cols != self.total_nodes:
            raise DimensionMismatchError(
                f"layout covers {self.total_nodes} nodes but matrix has {n_cols} columns"
            )

    def to_json(self) -> str:
        return json.dumps(
            {"layers": [{"name": n, "size": s} for n, s in self.layers]}
        )


def load_layout(path) -> NetworkLayout:
    """Read a layout JSON file ({"layers": [{"name", "size"}, ...]})."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise LayoutError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "layers" not in doc:
        raise LayoutError(f"{path}: missing top-level 'layers' list")
    layers = []
    for entry in doc["layers"]:
        try:
            layers.append((str(entry["name"]), int(entry["size"])))
        except (TypeError, KeyError, ValueError) as exc:
            raise LayoutError(f"{path}: malformed layer entry {entry!r}") from exc
    return NetworkLayout(tuple(layers))


def save_layout(path, layout: NetworkLayout) -> None:
    _atomic_write_bytes(path, (layout.to_json() + "\n").encode())


def single_layer_layout(n_nodes: int, name: str = "all") -> NetworkLayout:
    return NetworkLayout(((name, int(n_nodes)),))


def _validate_matrix(values, what: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError(f"{what} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise EmptyMatrixError(f"{what} is empty: shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteValuesError(f"{what} contains NaN or Inf entries")
    return arr


class BackgroundActivations:
    """Immutable n_backgrounds x n_nodes activation matrix defining "normal".

    Columns are lazily sorted on first batch query and cached; the cache is
    an extra copy of the matrix, which matters only for very large stores.
    """

    def __init__(self, values):
        arr = _validate_matrix(values, "background matrix")
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        elif arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        self._values = arr
        self._sorted = None

    @classmethod
    def from_file(cls, path) -> "BackgroundActivations":
        return cls(load_acts(path))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_backgrounds(self) -> int:
        return self._values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self._values.shape[1]

    def sorted_columns(self) -> np.ndarray:
        """Each column sorted ascending (cached; used for binary-search queries)."""
        if self._sorted is None:
            srt = np.sort(self._values, axis=0)
            srt.flags.writeable = False
            self._sorted = srt
        return self._sorted


class EvaluationBatch:
    """Activations of inputs under evaluation, with optional group labels."""

    def __init__(self, values, labels=None):
        arr = _validate_matrix(values, "evaluation matrix")
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        elif arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        self._values = arr
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != arr.shape[0]:
                raise DimensionMismatchError(
                    f"{len(labels)} labels for {arr.shape[0]} rows"
                )
        self.labels = labels

    @classmethod
    def from_file(cls, path, labels=None) -> "EvaluationBatch":
        return cls(load_acts(path), labels=labels)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_inputs(self) -> int:
        return self._values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self._values.shape[1]

    def check_against(self, background: BackgroundActivations) -> None:
        if self.n_nodes != background.n_nodes:
            raise DimensionMismatchError(
                f"evaluation batch has {self.n_nodes} nodes, "
                f"background has {background.n_nodes}"
            )
