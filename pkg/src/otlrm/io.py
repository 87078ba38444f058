"""Tensor persistence, ``.npy`` ingestion and raster slice export.

OT3D container layout::

    b"OT3D"                  4 bytes magic
    header length            uint32, little-endian
    header                   UTF-8 JSON {"dtype": "f64"|"f32", "shape": [n1, n2, n3],
                                         "layout": "frontal-slice-major,row-major"}
    payload                  little-endian floats; slice k outermost, each slice row-major
"""
import json
import struct

import numpy as np

from .errors import FormatError, IngestionError
from .tensor import as_tensor3

MAGIC = b"OT3D"
LAYOUT = "frontal-slice-major,row-major"
_DTYPES = {"f64": np.dtype("<f8"), "f32": np.dtype("<f4")}


def encode_tensor(X):
    X = as_tensor3(X)
    tag = "f32" if X.dtype == np.float32 else "f64"
    header = json.dumps({"dtype": tag, "shape": list(X.shape), "layout": LAYOUT}).encode("utf-8")
    payload = np.ascontiguousarray(X.transpose(2, 0, 1), dtype=_DTYPES[tag]).tobytes()
    return MAGIC + struct.pack("<I", len(header)) + header + payload


def decode_tensor(buf):
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError("bad magic, expected b'OT3D'", 0)
    if len(buf) < 8:
        raise FormatError("truncated header length field", 4)
    (hlen,) = struct.unpack("<I", buf[4:8])
    if len(buf) < 8 + hlen:
        raise FormatError(f"truncated header: need {hlen} bytes", 8)
    try:
        header = json.loads(buf[8:8 + hlen].decode("utf-8"))
        dtype = _DTYPES[header["dtype"]]
        shape = tuple(int(s) for s in header["shape"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid header: {exc}", 8) from None
    if len(shape) != 3 or min(shape) < 1:
        raise FormatError(f"header shape {shape} is not a 3-D shape", 8)
    if header.get("layout", LAYOUT) != LAYOUT:
        raise FormatError(f"unsupported layout {header['layout']!r}", 8)
    start = 8 + hlen
    need = int(np.prod(shape)) * dtype.itemsize
    if len(buf) - start != need:
        raise FormatError(f"payload has {len(buf) - start} bytes, shape {shape} needs {need}", start)
    n1, n2, n3 = shape
    data = np.frombuffer(buf, dtype=dtype, count=n1 * n2 * n3, offset=start)
    return np.ascontiguousarray(data.reshape(n3, n1, n2).transpose(1, 2, 0)).astype(dtype.newbyteorder("="))


def save_tensor(path, X):
    with open(path, "wb") as fh:
        fh.write(encode_tensor(X))


def load_tensor(path):
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())


def import_npy(path):
    """Read a version 1.0, C-order, little-endian float32/float64 3-D ``.npy`` file."""
    fmt = np.lib.format
    with open(path, "rb") as fh:
        try:
            version = fmt.read_magic(fh)
        except ValueError as exc:
            raise IngestionError(f"magic: {exc}") from None
        if version != (1, 0):
            raise IngestionError(f"version: {version[0]}.{version[1]} is not supported (need 1.0)")
        try:
            shape, fortran_order, dtype = fmt.read_array_header_1_0(fh)
        except ValueError as exc:
            raise IngestionError(f"header: {exc}") from None
        if fortran_order:
            raise IngestionError("fortran_order: only C-order arrays are supported")
        if dtype.str not in ("<f4", "<f8"):
            raise IngestionError(f"descr: {dtype.str!r} is not a little-endian 4- or 8-byte float")
        if len(shape) != 3:
            raise IngestionError(f"shape: {shape} is not 3-D")
        count = int(np.prod(shape))
        data = np.fromfile(fh, dtype=dtype, count=count)
    if data.size != count:
        raise IngestionError(f"payload: expected {count} values, found {data.size}")
    return as_tensor3(data.reshape(shape), name=str(path))


def load_any(path):
    """Load an OT3D container or a ``.npy`` file, chosen by magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(6)
    if head.startswith(b"\x93NUMPY"):
        return import_npy(path)
    return load_tensor(path)


def to_uint8(band):
    """Clamp to [0, 1] and quantise to 8 bits, rounding halves up."""
    v = np.clip(np.asarray(band, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_pgm(path, band):
    img = to_uint8(band)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_ppm(path, rgb):
    img = to_uint8(rgb)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pnm(path):
    """Minimal reader for the files written here; returns a uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    pos += 1
    kind, w, h = fields[0], int(fields[1]), int(fields[2])
    channels = 3 if kind == b"P6" else 1
    img = np.frombuffer(data, dtype=np.uint8, offset=pos, count=w * h * channels)
    return img.reshape((h, w, 3) if channels == 3 else (h, w))


def export_slices(prefix, X, bands, rgb=None):
    """Write one PGM per band in ``bands`` and optionally a pseudo-colour PPM.

    Returns the list of paths written.
    """
    X = as_tensor3(X)
    n3 = X.shape[2]
    for b in list(bands) + list(rgb or ()):
        if not 0 <= b < n3:
            raise IndexError(f"band {b} out of range [0, {n3})")
    paths = []
    for b in bands:
        path = f"{prefix}_band{b:03d}.pgm"
        write_pgm(path, X[:, :, b])
        paths.append(path)
    if rgb is not None:
        if len(rgb) != 3:
            raise ValueError(f"pseudo-colour needs three bands, got {len(rgb)}")
        path = f"{prefix}_rgb.ppm"
        write_ppm(path, np.stack([X[:, :, b] for b in rgb], axis=2))
        paths.append(path)
    return paths
