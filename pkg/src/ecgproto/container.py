"""Single-file container: JSON header plus named little-endian float32 arrays.

Layout: 4-byte magic ``EPC1``, uint32 (LE) header length, UTF-8 JSON header,
then the concatenated row-major float32 payloads. The header carries a
``meta`` dict (caller-defined) and an ``arrays`` list with name/shape/offset
per array, offsets counted from the start of the payload section.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ShapeError

MAGIC = b"EPC1"


def write_container(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    entries = []
    offset = 0
    payloads = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        payloads.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"version": 1, "meta": meta, "arrays": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def read_container(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ShapeError(f"{path}: not a container file (bad magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        buf = payload[start : start + 4 * n]
        if len(buf) != 4 * n:
            raise ShapeError(f"{path}: truncated payload for array {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
    return arrays, header["meta"]
