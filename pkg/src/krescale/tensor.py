"""Dense float64 tensors and the KTA archive format.

A :class:`Tensor` is an immutable row-major array of finite float64 values
with rank 1 to 4.  A :class:`ComplexGrid` carries a complex spectrum with the
same shape rules.  Archives serialize named tensors to a little-endian binary
stream:

    magic "KTA1" | version u32 = 1 | count u32
    per entry: name_len u32 | name UTF-8 | rank u32 | dims rank x u64 |
               payload f64 x prod(dims)

No trailing bytes are permitted after the last entry.
"""

import struct

import numpy as np

from .errors import (
    BadMagic,
    DuplicateName,
    EmptyShape,
    IoFailure,
    NonFiniteValue,
    ShapeMismatch,
    TrailingData,
    Truncated,
    UnsupportedVersion,
)

MAGIC = b"KTA1"
VERSION = 1
MAX_RANK = 4

_HEADER = struct.Struct("<4sII")
_U32 = struct.Struct("<I")


def _check_shape(shape):
    shape = tuple(int(d) for d in shape)
    if len(shape) == 0:
        raise EmptyShape("shape must have at least one dimension")
    if len(shape) > MAX_RANK:
        raise ShapeMismatch(f"rank {len(shape)} exceeds maximum {MAX_RANK}")
    if any(d < 1 for d in shape):
        raise EmptyShape(f"all dimensions must be >= 1, got {shape}")
    return shape


class Tensor:
    """Immutable dense float64 array, rank 1 to 4, row-major.

    Parameters
    ----------
    shape : sequence of int
        Dimensions, each >= 1.
    data : array-like
        Values in row-major order; total length must equal prod(shape).
    """

    __slots__ = ("_array",)

    def __init__(self, shape, data):
        shape = _check_shape(shape)
        arr = np.asarray(data, dtype=np.float64)
        if arr.size != int(np.prod(shape)):
            raise ShapeMismatch(
                f"shape {shape} needs {int(np.prod(shape))} values, got {arr.size}"
            )
        arr = np.ascontiguousarray(arr.reshape(shape))
        if not np.isfinite(arr).all():
            raise NonFiniteValue("tensor values must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        self._array = arr

    @classmethod
    def from_array(cls, arr):
        """Build a tensor from a NumPy array, validating rank and finiteness."""
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr.ravel())

    @property
    def shape(self):
        return self._array.shape

    @property
    def rank(self):
        return self._array.ndim

    @property
    def size(self):
        return self._array.size

    @property
    def array(self):
        """Read-only NumPy view of the values."""
        return self._array

    def ravel(self):
        """Values in row-major order as a read-only 1-D view."""
        return self._array.reshape(-1)

    def __getitem__(self, idx):
        return self._array[idx]

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.shape == other.shape
            and self._array.tobytes() == other._array.tobytes()
        )

    def __hash__(self):
        return hash((self.shape, self._array.tobytes()))

    def __repr__(self):
        return f"Tensor(shape={self.shape})"


def tensor_new(shape, data):
    """Construct a :class:`Tensor` from a shape and flat row-major data."""
    return Tensor(shape, data)


class ComplexGrid:
    """Immutable complex128 array with the same shape rules as Tensor."""

    __slots__ = ("_array",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.complex128)
        _check_shape(arr.shape)
        if not np.isfinite(arr).all():
            raise NonFiniteValue("grid values must be finite")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self._array = arr

    @property
    def shape(self):
        return self._array.shape

    @property
    def rank(self):
        return self._array.ndim

    @property
    def array(self):
        return self._array

    @property
    def re(self):
        return self._array.real

    @property
    def im(self):
        return self._array.imag

    def __getitem__(self, idx):
        return self._array[idx]

    def __repr__(self):
        return f"ComplexGrid(shape={self.shape})"


def _write(sink, payload):
    try:
        sink.write(payload)
    except OSError as exc:
        raise IoFailure(f"write failed: {exc}") from exc


def archive_write(sink, entries):
    """Serialize named tensors to a binary stream.

    ``entries`` is a mapping or iterable of (name, Tensor) pairs; insertion
    order is preserved.  Names must be unique and non-empty.
    """
    if hasattr(entries, "items"):
        entries = entries.items()
    pairs = list(entries)
    seen = set()
    for name, _ in pairs:
        if not name:
            raise DuplicateName("entry names must be non-empty")
        if name in seen:
            raise DuplicateName(f"duplicate entry name {name!r}")
        seen.add(name)

    _write(sink, _HEADER.pack(MAGIC, VERSION, len(pairs)))
    for name, tensor in pairs:
        if not isinstance(tensor, Tensor):
            tensor = Tensor.from_array(tensor)
        encoded = name.encode("utf-8")
        _write(sink, _U32.pack(len(encoded)))
        _write(sink, encoded)
        _write(sink, _U32.pack(tensor.rank))
        _write(sink, struct.pack(f"<{tensor.rank}Q", *tensor.shape))
        _write(sink, tensor.ravel().astype("<f8", copy=False).tobytes())


def _read_exact(source, n, what):
    try:
        chunk = source.read(n)
    except OSError as exc:
        raise IoFailure(f"read failed: {exc}") from exc
    if chunk is None or len(chunk) < n:
        raise Truncated(f"stream ended while reading {what}")
    return chunk


def archive_read(source):
    """Read a full archive from a binary stream into a dict of tensors.

    Raises BadMagic, UnsupportedVersion, Truncated, or TrailingData when the
    stream is not a well-formed archive.
    """
    head = _read_exact(source, _HEADER.size, "header")
    magic, version, count = _HEADER.unpack(head)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} not supported")

    out = {}
    for _ in range(count):
        (name_len,) = _U32.unpack(_read_exact(source, 4, "name length"))
        name = _read_exact(source, name_len, "name").decode("utf-8")
        (rank,) = _U32.unpack(_read_exact(source, 4, "rank"))
        if not 1 <= rank <= MAX_RANK:
            raise Truncated(f"entry {name!r} declares invalid rank {rank}")
        dims = struct.unpack(
            f"<{rank}Q", _read_exact(source, 8 * rank, "dimensions")
        )
        n_values = 1
        for d in dims:
            n_values *= d
        payload = _read_exact(source, 8 * n_values, f"payload of {name!r}")
        values = np.frombuffer(payload, dtype="<f8")
        if name in out:
            raise DuplicateName(f"duplicate entry name {name!r}")
        out[name] = Tensor(dims, values)

    if source.read(1):
        raise TrailingData("bytes remain after the last entry")
    return out


def archive_write_path(path, entries):
    """Write an archive to a file path."""
    try:
        with open(path, "wb") as fh:
            archive_write(fh, entries)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def archive_read_path(path):
    """Read an archive from a file path."""
    try:
        with open(path, "rb") as fh:
            return archive_read(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
