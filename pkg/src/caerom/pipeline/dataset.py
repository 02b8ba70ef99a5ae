"""Snapshot dataset file: N parameter vectors and their solution matrices.

Layout (integers little-endian)::

    8 bytes   magic b"CAEROMDS"
    4 bytes   uint32 header length H
    H bytes   UTF-8 JSON header, space padded
    N*p*4     parameter block, float32, row-major (N, p)
    N*d*nt*4  solution block, float32, row-major (N, d, n_t)
    8 bytes   blake2b-64 digest of the two blocks

The header is written with room to spare and rewritten once all solutions
are in, so the solution block can be streamed to disk one sample at a time
and the file can be memory-mapped on load.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from caerom.errors import DimensionError, FormatError

MAGIC = b"CAEROMDS"
FORMAT_VERSION = 1
_F32 = np.dtype("<f4")
_HEADER_SLACK = 512


@dataclass
class SnapshotDataset:
    params: np.ndarray  # (N, p) float64 holding float32-representable values
    solutions: np.ndarray  # (N, d, n_t)
    param_names: list = field(default_factory=list)
    fingerprint: str = ""
    stats: dict = field(default_factory=dict)
    checksum: str = ""

    @property
    def shape(self):
        return tuple(self.solutions.shape)

    def subset(self, n):
        return SnapshotDataset(self.params[:n], self.solutions[:n], list(self.param_names), self.fingerprint)


def _header_bytes(header, reserve=None):
    text = json.dumps(header, sort_keys=True).encode()
    if reserve is not None:
        if len(text) > reserve:
            raise FormatError("dataset header outgrew its reserved space")
        text = text.ljust(reserve, b" ")
    return text


class DatasetWriter:
    """Stream solution matrices into a dataset file."""

    def __init__(self, path, params, shape, param_names=(), fingerprint=""):
        self.path = path
        self.params = np.asarray(params, dtype=_F32)
        if self.params.ndim != 2:
            raise DimensionError(f"params must be (N, p), got {self.params.shape}")
        self.n = self.params.shape[0]
        self.shape = tuple(int(s) for s in shape)
        self.header = {
            "format_version": FORMAT_VERSION,
            "dtype": "float32",
            "n": self.n,
            "d": self.shape[0],
            "n_t": self.shape[1],
            "param_names": list(param_names),
            "fingerprint": fingerprint,
            "stats": {"min": None, "max": None, "n_written": 0},
        }
        placeholder = dict(self.header, stats={"min": (-1.0e308).hex(), "max": (-1.0e308).hex(), "n_written": self.n})
        self.reserve = len(_header_bytes(placeholder)) + _HEADER_SLACK
        self._hash = hashlib.blake2b(digest_size=8)
        self._written = 0
        self._lo, self._hi = np.inf, -np.inf
        self._fh = open(path, "wb")
        self._fh.write(MAGIC + struct.pack("<I", self.reserve) + _header_bytes(self.header, self.reserve))
        blob = self.params.tobytes()
        self._fh.write(blob)
        self._hash.update(blob)

    def write(self, values):
        if self._written >= self.n:
            raise DimensionError(f"dataset already holds {self.n} solutions")
        values = np.asarray(values, dtype=_F32)
        if values.shape != self.shape:
            raise DimensionError(f"solution {self._written} has shape {values.shape}, expected {self.shape}")
        blob = np.ascontiguousarray(values).tobytes()
        self._fh.write(blob)
        self._hash.update(blob)
        self._lo = min(self._lo, float(values.min()))
        self._hi = max(self._hi, float(values.max()))
        self._written += 1

    def close(self):
        """Finish the file; returns the hex checksum. Incomplete datasets are rejected."""
        if self._fh is None:
            return self.header.get("checksum")
        if self._written != self.n:
            self._fh.close()
            self._fh = None
            raise DimensionError(f"only {self._written} of {self.n} solutions written to {self.path}")
        digest = self._hash.digest()
        self._fh.write(digest)
        self.header["stats"] = {"min": float(self._lo).hex(), "max": float(self._hi).hex(), "n_written": self._written}
        self._fh.seek(12)
        self._fh.write(_header_bytes(self.header, self.reserve))
        self._fh.close()
        self._fh = None
        self.header["checksum"] = digest.hex()
        return digest.hex()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        elif self._fh is not None:
            self._fh.close()
            self._fh = None
        return False


def save_dataset(path, params, solutions, param_names=(), fingerprint=""):
    solutions = np.asarray(solutions)
    with DatasetWriter(path, params, solutions.shape[1:], param_names, fingerprint) as w:
        for U in solutions:
            w.write(U)
    return w.header["checksum"]


def read_header(path):
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:8] != MAGIC:
            raise FormatError(f"{path}: not a dataset file (bad magic)")
        (hlen,) = struct.unpack("<I", head[8:])
        try:
            header = json.loads(fh.read(hlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: corrupt header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported dataset version {header.get('format_version')}")
    return header, 12 + hlen


def load_dataset(path, verify=True, mmap=False):
    """Read a dataset; the checksum is verified unless ``verify`` is False.

    With ``mmap`` the solution block stays on disk as a read-only float32
    memory map; otherwise it is loaded as float64.
    """
    header, offset = read_header(path)
    n, d, nt = header["n"], header["d"], header["n_t"]
    p = len(header["param_names"])
    n_par, n_sol = n * p * 4, n * d * nt * 4
    with open(path, "rb") as fh:
        fh.seek(0, 2)
        size = fh.tell()
        if size != offset + n_par + n_sol + 8:
            raise FormatError(f"{path}: file is {size} bytes, header implies {offset + n_par + n_sol + 8}")
        fh.seek(offset)
        par_blob = fh.read(n_par)
        sol_blob = fh.read(n_sol) if verify or not mmap else None
        fh.seek(offset + n_par + n_sol)
        stored = fh.read(8)
    if verify:
        h = hashlib.blake2b(digest_size=8)
        h.update(par_blob)
        h.update(sol_blob)
        if h.digest() != stored:
            raise FormatError(f"{path}: checksum mismatch")
    params = np.frombuffer(par_blob, dtype=_F32).reshape(n, p).astype(np.float64)
    if mmap:
        sols = np.memmap(path, dtype=_F32, mode="r", offset=offset + n_par, shape=(n, d, nt))
    else:
        sols = np.frombuffer(sol_blob, dtype=_F32).reshape(n, d, nt).astype(np.float64)
    checksum = stored.hex()
    return SnapshotDataset(params, sols, header["param_names"], header["fingerprint"], header["stats"], checksum)


def file_checksum(path):
    """blake2b-64 of a whole file, for artifact comparisons."""
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
