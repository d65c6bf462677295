"""File formats: binary netpbm images (PGM/PPM) and raw tensor/mask containers.

Images load as float arrays scaled to [0, 1]; 16-bit samples are big-endian
per the netpbm convention.  Tensors and masks use little-endian containers
with a 4-byte magic, three uint64 dimensions, and a payload laid out
frontal-slice-major, column-major within each slice (Fortran order).
"""

import struct

import numpy as np

from .core import ObservationMask

T3_MAGIC = b"T3F1"
MASK_MAGIC = b"T3M1"


def _read_header_tokens(data, count):
    """Read whitespace-separated header tokens, skipping '#' comments.

    Returns the tokens and the offset of the first payload byte (one
    whitespace character after the last token).
    """
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise ValueError("truncated image header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if i >= len(data) or not data[i : i + 1].isspace():
        raise ValueError("missing whitespace after image header")
    return tokens, i + 1


def load_image(path):
    """Load a binary PGM (P5) or PPM (P6) image as floats in [0, 1].

    Grayscale images come back as (height, width); color as
    (height, width, 3).
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] not in (b"P5", b"P6"):
        raise ValueError(f"unsupported image magic {data[:2]!r} in {path}")
    color = data[:2] == b"P6"
    tokens, offset = _read_header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ValueError(f"non-numeric image header in {path}") from None
    if width < 1 or height < 1:
        raise ValueError(f"bad image dimensions {width}x{height} in {path}")
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval {maxval} out of range in {path}")
    channels = 3 if color else 1
    count = width * height * channels
    dtype = ">u2" if maxval > 255 else np.uint8
    try:
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    except ValueError:
        raise ValueError(f"truncated pixel data in {path}") from None
    img = raw.astype(float).reshape(height, width, channels) / maxval
    return img[:, :, 0] if not color else img


def save_image(path, img, maxval=255):
    """Write a PGM (2-D input) or PPM (h x w x 3 input) with round-half-up quantization.

    Values are clipped to [0, 1] before scaling; no comments are written.
    """
    img = np.asarray(img, dtype=float)
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval {maxval} out of range")
    if img.ndim == 3 and img.shape[2] == 3:
        magic, height, width = b"P6", img.shape[0], img.shape[1]
        flat = img
    elif img.ndim == 2:
        magic, height, width = b"P5", img.shape[0], img.shape[1]
        flat = img[:, :, None]
    else:
        raise ValueError(f"cannot save shape {img.shape} as PGM/PPM")
    q = np.floor(np.clip(flat, 0.0, 1.0) * maxval + 0.5).astype(np.uint32)
    q = np.minimum(q, maxval)
    dtype = ">u2" if maxval > 255 else np.uint8
    payload = q.astype(dtype).tobytes()
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n%d\n" % (width, height, maxval))
        f.write(payload)


def save_tensor(path, a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 3:
        raise ValueError(f"tensor file stores 3 modes, got shape {a.shape}")
    with open(path, "wb") as f:
        f.write(T3_MAGIC)
        f.write(struct.pack("<3Q", *a.shape))
        f.write(np.ravel(a, order="F").astype("<f8").tobytes())


def load_tensor(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != T3_MAGIC:
        raise ValueError(f"bad magic in tensor file {path}")
    if len(data) < 28:
        raise ValueError(f"truncated tensor header in {path}")
    dims = struct.unpack("<3Q", data[4:28])
    count = dims[0] * dims[1] * dims[2]
    payload = np.frombuffer(data, dtype="<f8", count=count, offset=28)
    if payload.size < count or len(data) != 28 + 8 * count:
        raise ValueError(f"tensor payload size mismatch in {path}")
    return payload.reshape(dims, order="F").copy()


def save_mask(path, mask):
    if not isinstance(mask, ObservationMask):
        mask = ObservationMask(mask)
    with open(path, "wb") as f:
        f.write(MASK_MAGIC)
        f.write(struct.pack("<3Q", *mask.dims))
        f.write(np.ravel(mask.observed, order="F").astype(np.uint8).tobytes())
        f.write(struct.pack("B", int(mask.pad_observed_zero)))


def load_mask(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MASK_MAGIC:
        raise ValueError(f"bad magic in mask file {path}")
    if len(data) < 28:
        raise ValueError(f"truncated mask header in {path}")
    dims = struct.unpack("<3Q", data[4:28])
    count = dims[0] * dims[1] * dims[2]
    if len(data) != 28 + count + 1:
        raise ValueError(f"mask payload size mismatch in {path}")
    flags = np.frombuffer(data, dtype=np.uint8, count=count, offset=28)
    if np.any(flags > 1):
        raise ValueError(f"mask bytes must be 0 or 1 in {path}")
    observed = flags.astype(bool).reshape(dims, order="F")
    return ObservationMask(observed, pad_observed_zero=bool(data[-1]))
