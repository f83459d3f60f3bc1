"""
Versioned binary container for dataset caches and model files

Layout:
    MAGIC (8 bytes) | format version (uint16 LE) | header length (uint32 LE)
    | UTF-8 JSON header (sorted keys) | arrays in np.save format, header order

The encoding is byte-deterministic: writing the same header and arrays twice
produces identical files.
"""

import io
import json
import struct

import numpy as np

from utils.exceptions import DatasetFormatError

MAGIC = b'FAIRREC\x00'
FORMAT_VERSION = 1
_PREFIX = struct.Struct('<HI')


def write_container(path, kind, header, arrays):
    """Write a header dict and named arrays to path"""
    names = list(arrays.keys())
    full_header = dict(header)
    full_header['kind'] = kind
    full_header['arrays'] = names
    header_bytes = json.dumps(full_header, sort_keys=True, separators=(',', ':')).encode('utf-8')

    buffer = io.BytesIO()
    buffer.write(MAGIC)
    buffer.write(_PREFIX.pack(FORMAT_VERSION, len(header_bytes)))
    buffer.write(header_bytes)
    for name in names:
        array = np.ascontiguousarray(arrays[name])
        if array.dtype == object:
            raise DatasetFormatError(f"Array {name!r} has object dtype and cannot be stored")
        np.save(buffer, array, allow_pickle=False)

    with open(path, 'wb') as fh:
        fh.write(buffer.getvalue())


def read_container(path, expected_kind=None):
    """Read a container; returns (header, {name: array})"""
    with open(path, 'rb') as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DatasetFormatError(f"{path} is not a FairRec container")

        prefix = fh.read(_PREFIX.size)
        if len(prefix) != _PREFIX.size:
            raise DatasetFormatError(f"{path} is truncated")
        version, header_len = _PREFIX.unpack(prefix)
        if version != FORMAT_VERSION:
            raise DatasetFormatError(
                f"{path} has format version {version}, expected {FORMAT_VERSION}"
            )

        try:
            header = json.loads(fh.read(header_len).decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DatasetFormatError(f"{path} has an unreadable header: {e}")

        if expected_kind is not None and header.get('kind') != expected_kind:
            raise DatasetFormatError(
                f"{path} holds a {header.get('kind')!r} container, expected {expected_kind!r}"
            )

        arrays = {}
        for name in header.get('arrays', []):
            try:
                arrays[name] = np.load(fh, allow_pickle=False)
            except (ValueError, EOFError) as e:
                raise DatasetFormatError(f"{path}: array {name!r} unreadable: {e}")

    return header, arrays
