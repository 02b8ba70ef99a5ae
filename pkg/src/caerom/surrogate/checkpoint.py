"""Binary checkpoint container for trained networks.

Layout (all integers little-endian)::

    8 bytes   magic b"CAEROMCK"
    4 bytes   uint32 header length H
    H bytes   UTF-8 JSON header (format version, kind, architecture,
              normalization constants, parameter names and shapes, metadata)
    then per weight tensor, in declaration order:
    8 bytes   uint64 blob length in bytes
    blob      little-endian float32 values, row-major

JSON numbers are written with Python's shortest round-trip repr, so the
float64 normalization constants survive exactly.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from caerom.errors import FormatError
from caerom.surrogate.architecture import CaeArchitecture, FfnnArchitecture
from caerom.surrogate.models import AffineScaling, ConvAutoencoder, FeedForward

MAGIC = b"CAEROMCK"
FORMAT_VERSION = 1
_LE_F32 = np.dtype("<f4")


@dataclass
class Checkpoint:
    model: object
    metadata: dict = field(default_factory=dict)

    @property
    def kind(self):
        return "cae" if isinstance(self.model, ConvAutoencoder) else "ffnn"


def _named_params(model):
    if isinstance(model, ConvAutoencoder):
        offset = len(model.encoder)
        seq = model.encoder.parameters() + [(i + offset, n, a) for i, n, a in model.decoder.parameters()]
    else:
        seq = model.net.parameters()
    return [(f"{i}.{name}", arr) for i, name, arr in seq]


def _header(model, metadata):
    if isinstance(model, ConvAutoencoder):
        header = {"kind": "cae", "architecture": model.arch.to_dict(), "scaling": model.scaling.to_dict()}
    elif isinstance(model, FeedForward):
        header = {
            "kind": "ffnn",
            "architecture": model.arch.to_dict(),
            "input_scaling": model.input_scaling.to_dict(),
            "output_scaling": model.output_scaling.to_dict(),
            "param_lo": None if model.param_lo is None else np.asarray(model.param_lo, float).tolist(),
            "param_hi": None if model.param_hi is None else np.asarray(model.param_hi, float).tolist(),
        }
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    header["format_version"] = FORMAT_VERSION
    header["dtype"] = "float32"
    header["params"] = [{"name": n, "shape": list(a.shape)} for n, a in _named_params(model)]
    header["metadata"] = dict(metadata or {})
    return header


def to_bytes(model, metadata=None):
    header = json.dumps(_header(model, metadata), sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<I", len(header)), header]
    for _, arr in _named_params(model):
        blob = np.ascontiguousarray(arr, dtype=_LE_F32).tobytes()
        parts += [struct.pack("<Q", len(blob)), blob]
    return b"".join(parts)


def save_checkpoint(model, path, metadata=None):
    data = to_bytes(model, metadata)
    with open(path, "wb") as fh:
        fh.write(data)
    return path


def from_bytes(data):
    if data[:8] != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    try:
        (hlen,) = struct.unpack_from("<I", data, 8)
        header = json.loads(data[12 : 12 + hlen].decode())
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {header.get('format_version')}")
    kind = header["kind"]
    if kind == "cae":
        model = ConvAutoencoder(CaeArchitecture.from_dict(header["architecture"]), dtype=np.float32)
        model.scaling = AffineScaling.from_dict(header["scaling"])
    elif kind == "ffnn":
        model = FeedForward(FfnnArchitecture.from_dict(header["architecture"]), dtype=np.float32)
        model.input_scaling = AffineScaling.from_dict(header["input_scaling"])
        model.output_scaling = AffineScaling.from_dict(header["output_scaling"])
        if header["param_lo"] is not None:
            model.param_lo = np.asarray(header["param_lo"], dtype=float)
            model.param_hi = np.asarray(header["param_hi"], dtype=float)
    else:
        raise FormatError(f"unknown checkpoint kind {kind!r}")
    params = _named_params(model)
    if [p["name"] for p in header["params"]] != [n for n, _ in params]:
        raise FormatError("parameter list in header does not match the architecture")
    pos = 12 + hlen
    for spec, (name, arr) in zip(header["params"], params):
        if tuple(spec["shape"]) != arr.shape:
            raise FormatError(f"{name}: header shape {spec['shape']} != architecture shape {arr.shape}")
        if pos + 8 > len(data):
            raise FormatError(f"truncated checkpoint before {name}")
        (n,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        if n != arr.size * 4 or pos + n > len(data):
            raise FormatError(f"{name}: blob length {n} does not match shape {arr.shape}")
        arr[...] = np.frombuffer(data, dtype=_LE_F32, count=arr.size, offset=pos).reshape(arr.shape)
        pos += n
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after the last weight blob")
    return Checkpoint(model, header["metadata"])


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
