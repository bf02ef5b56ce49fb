"""SLPW parameter checkpoints.

Little-endian layout::

    header   magic "SLPW", version u32, parameter count u32, metadata length u32
    metadata UTF-8 JSON of UnfoldedModel.config()
    records  one per parameter:
             name length u16, name, role u8, precision u8, storage u8,
             ndim u8, shape u32 * ndim, payload

The payload is the raw f64 values (storage 0) or, for quantized weights
(storage 1), ``beta`` f64, ``rho`` f64 and the packed sign plane followed
by the packed nonzero plane for ternary tensors.  Planes use the row-major,
byte-padded layout of ``rslp.quant.pack_rows``.  A packed weight loads as
``beta * levels``, which quantizes back to the same planes and ``beta``.
"""

import json
import struct
from pathlib import Path

import numpy as np

from rslp.errors import FormatError
from rslp.model import UnfoldedModel
from rslp.nn import ROLES
from rslp.quant import PRECISIONS, QuantTensor, _rows, pack_rows, quantize

MAGIC = b"SLPW"
VERSION = 1
RAW, PACKED = 0, 1
_HEADER = struct.Struct("<4sIII")
_RECORD = struct.Struct("<BBBB")
_SCALES = struct.Struct("<dd")


def _plane_bytes(shape):
    rows, n = _rows(shape)
    return rows * ((n + 7) // 8)


def _encode(param, packed):
    name = param.name.encode()
    shape = param.values.shape
    storage = PACKED if packed and param.precision != "fp32" else RAW
    out = [
        struct.pack("<H", len(name)), name,
        _RECORD.pack(ROLES.index(param.role), PRECISIONS.index(param.precision), storage, len(shape)),
        struct.pack(f"<{len(shape)}I", *shape),
    ]
    if storage == RAW:
        out.append(np.ascontiguousarray(param.values, dtype="<f8").tobytes())
    else:
        q = quantize(param.values, param.precision)
        out.append(_SCALES.pack(q.beta, q.rho if q.rho is not None else 0.0))
        out.append(q.sign.tobytes())
        if q.mask is not None:
            out.append(q.mask.tobytes())
    return b"".join(out)


def save_checkpoint(model, path, packed=True):
    """Write ``model`` to ``path``.

    Quantized weights are stored as bit planes unless ``packed`` is False,
    in which case their latent float values are kept (for resuming
    training).
    """
    meta = json.dumps(model.config(), sort_keys=True).encode()
    params = model.params()
    body = b"".join(_encode(p, packed) for p in params)
    Path(path).write_bytes(_HEADER.pack(MAGIC, VERSION, len(params), len(meta)) + meta + body)


class _Reader:
    def __init__(self, raw):
        self.raw = raw
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.raw):
            raise FormatError(f"truncated {what}", self.pos)
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return fmt.unpack(self.take(fmt.size, what))


def _decode_record(rd):
    start = rd.pos
    (name_len,) = struct.unpack("<H", rd.take(2, "record name length"))
    try:
        name = rd.take(name_len, "record name").decode()
    except UnicodeDecodeError:
        raise FormatError("parameter name is not UTF-8", start + 2) from None
    code_pos = rd.pos
    role, precision, storage, ndim = rd.unpack(_RECORD, "record codes")
    if role >= len(ROLES) or precision >= len(PRECISIONS) or storage not in (RAW, PACKED):
        raise FormatError(f"invalid codes for parameter {name!r}", code_pos)
    shape = struct.unpack(f"<{ndim}I", rd.take(4 * ndim, "shape"))
    size = int(np.prod(shape))
    precision = PRECISIONS[precision]
    if storage == RAW:
        values = np.frombuffer(rd.take(8 * size, f"values of {name!r}"), dtype="<f8").reshape(shape)
        return name, ROLES[role], precision, values.astype(float), code_pos
    if precision == "fp32":
        raise FormatError(f"fp32 parameter {name!r} cannot be bit-packed", code_pos)
    beta, rho = rd.unpack(_SCALES, "scales")
    nbytes = _plane_bytes(shape)
    rows = _rows(shape)[0]
    sign = np.frombuffer(rd.take(nbytes, "sign plane"), dtype=np.uint8).reshape(rows, -1)
    mask = None
    if precision == "ternary":
        mask = np.frombuffer(rd.take(nbytes, "mask plane"), dtype=np.uint8).reshape(rows, -1)
    q = QuantTensor(precision, tuple(shape), beta, sign, mask, rho if mask is not None else None)
    return name, ROLES[role], precision, q.values(), code_pos


def load_checkpoint(path):
    """Read an SLPW file back into an UnfoldedModel."""
    raw = Path(path).read_bytes()
    rd = _Reader(raw)
    magic, version, count, meta_len = rd.unpack(_HEADER, "header")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    meta_pos = rd.pos
    try:
        meta = json.loads(rd.take(meta_len, "metadata").decode())
        model = UnfoldedModel.from_config(meta)
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid metadata: {exc}", meta_pos) from None
    params = model.named_params()
    if count != len(params):
        raise FormatError(f"checkpoint holds {count} parameters, model expects {len(params)}", 8)
    seen = set()
    for _ in range(count):
        start = rd.pos
        name, role, precision, values, code_pos = _decode_record(rd)
        p = params.get(name)
        if p is None or name in seen:
            raise FormatError(f"unexpected parameter {name!r}", start)
        if (role, precision) != (p.role, p.precision) or values.shape != p.values.shape:
            raise FormatError(f"parameter {name!r} does not match the model layout", code_pos)
        p.values[...] = values
        seen.add(name)
    if rd.pos != len(raw):
        raise FormatError(f"{len(raw) - rd.pos} trailing bytes", rd.pos)
    return model
