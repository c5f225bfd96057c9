"""Binary model files and ``key = value`` run configs.

Model file layout (all integers little-endian):

    b"CURA"                 magic
    u16                     format version
    u32 + bytes             UTF-8 header: ``key=value`` lines (config, then
                            optional pipeline metadata under ``meta.``)
    u16                     blob count
    per blob: u8 ndim, u32 x ndim extents, float64 x prod(extents)
    u32                     CRC-32 of every preceding byte
"""

from __future__ import annotations

import dataclasses
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    ModelFileError,
    ParameterError,
    ParseError,
    UnsupportedVersionError,
)
from .model import CuraConfig, CuraParams, param_shapes

MAGIC = b"CURA"
FORMAT_VERSION = 1

_INT_FIELDS = ("in_channels", "seq_len", "model_dim", "out_dim", "kernel_size", "seed")


@dataclass
class ModelFile:
    config: CuraConfig
    params: CuraParams
    meta: dict = field(default_factory=dict)


def config_to_text(config):
    return "".join(f"{f.name}={getattr(config, f.name)}\n" for f in dataclasses.fields(config))


def _config_from_pairs(pairs):
    kwargs = {}
    for f in dataclasses.fields(CuraConfig):
        if f.name not in pairs:
            raise ModelFileError(f"model header lacks {f.name!r}")
        raw = pairs[f.name]
        kwargs[f.name] = int(raw) if f.name in _INT_FIELDS else raw
    return CuraConfig(**kwargs)


def encode_model(config, params, meta=None):
    head = config_to_text(config)
    for key, value in (meta or {}).items():
        if "\n" in str(value) or "=" in key:
            raise ParameterError(f"metadata {key!r} must be a single line without '=' in the key")
        head += f"meta.{key}={value}\n"
    head_bytes = head.encode("utf-8")
    shapes = param_shapes(config)
    if list(params.names()) != list(shapes):
        raise ParameterError(f"params {params.names()} do not match config layout {list(shapes)}")
    out = bytearray(MAGIC)
    out += struct.pack("<HI", FORMAT_VERSION, len(head_bytes))
    out += head_bytes
    out += struct.pack("<H", len(shapes))
    for name, shape in shapes.items():
        arr = np.asarray(params[name], dtype="<f8")
        if arr.shape != shape:
            raise ParameterError(f"{name} has shape {arr.shape}, config expects {shape}")
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes(order="C")
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def decode_model(blob):
    """Parse model bytes; raises a ModelFileError subclass on any defect."""
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError("not a CURA model file (bad magic)")
    if len(blob) < 14:
        raise ChecksumError("file too short")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError("checksum mismatch; file is corrupt or truncated")
    version, head_len = struct.unpack_from("<HI", body, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported model format version {version}")
    pos = 10
    try:
        head = body[pos : pos + head_len].decode("utf-8")
        pos += head_len
        pairs, meta = {}, {}
        for line in head.splitlines():
            key, _, value = line.partition("=")
            if key.startswith("meta."):
                meta[key[5:]] = value
            else:
                pairs[key] = value
        config = _config_from_pairs(pairs)
        (count,) = struct.unpack_from("<H", body, pos)
        pos += 2
        shapes = param_shapes(config)
        if count != len(shapes):
            raise ModelFileError(f"file holds {count} blobs, config needs {len(shapes)}")
        arrays = {}
        for name, want in shapes.items():
            (ndim,) = struct.unpack_from("<B", body, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", body, pos)
            pos += 4 * ndim
            if tuple(shape) != want:
                raise ModelFileError(f"blob {name} has shape {shape}, config expects {want}")
            n = int(np.prod(shape, dtype=np.int64))
            arrays[name] = np.frombuffer(body, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(shape)
            pos += 8 * n
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"malformed model file: {exc}") from exc
    if pos != len(body):
        raise ModelFileError(f"{len(body) - pos} trailing bytes after parameter blobs")
    return ModelFile(config, CuraParams(arrays), meta)


def save_model(path, config, params, meta=None):
    with open(path, "wb") as fh:
        fh.write(encode_model(config, params, meta))


def read_model(path):
    with open(path, "rb") as fh:
        return decode_model(fh.read())


def load_model(path):
    """Returns (config, params)."""
    m = read_model(path)
    return m.config, m.params


# ---------------------------------------------------------------------------
# run configs


def _parse_bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


RUN_KEYS = {
    # model
    "in_channels": int,
    "seq_len": int,
    "model_dim": int,
    "out_dim": int,
    "gating_kind": str,
    "gate_activation": str,
    "nonlinearity": str,
    "filter_kind": str,
    "filter_mode": str,
    "kernel_size": int,
    "pooling": str,
    "seed": int,
    # optimizer
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    "amsgrad": _parse_bool,
    "weight_decay": float,
    "epochs": int,
    "batch_size": int,
    # data
    "task": str,
    "data": str,
    "target": str,
    "features": _parse_list,
    "window": int,
    "horizon": int,
    "stride": int,
    "train_fraction": float,
    # synthetic data, used when no data path is given
    "synth_kind": str,
    "synth_rows": int,
    "synth_channels": int,
    "synth_noise": float,
    "synth_classes": int,
}


def parse_run_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Every non-blank line must bind a known key once, otherwise ParseError
    with the 1-based line number.
    """
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=line_no)
        if key not in RUN_KEYS:
            raise ParseError(f"unknown key {key!r}", line=line_no)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line=line_no)
        try:
            out[key] = RUN_KEYS[key](value)
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {exc}", line=line_no) from None
    return out


def read_run_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_run_config(fh.read())
