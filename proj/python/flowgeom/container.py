"""Reader for the F4R1 tensor container written by the command-line tool."""

import json
import struct
import zlib

import numpy as np

MAGIC = b"F4R1"
ALIGNMENT = 64


def read_container(path):
    """Return (metadata dict, {name: float32 array}) and verify the payload CRC."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 or data[:4] != MAGIC:
        raise ValueError(f"{path}: not an F4R1 container")
    (header_len,) = struct.unpack_from("<Q", data, 4)
    payload_start = 12 + header_len
    if payload_start % ALIGNMENT or payload_start + 4 > len(data):
        raise ValueError(f"{path}: bad header length")
    payload = data[payload_start:-4]
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(payload) != crc:
        raise ValueError(f"{path}: CRC mismatch")
    header = json.loads(data[12:payload_start].decode("utf-8"))
    tensors = {}
    for name, desc in header["tensors"].items():
        shape = tuple(desc["shape"])
        count = int(np.prod(shape))
        start = desc["byte_offset"]
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=start).reshape(shape)
    return header.get("metadata", {}), tensors
