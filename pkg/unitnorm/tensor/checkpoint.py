"""
Module :module:`unitnorm.tensor.checkpoint` reads and writes named arrays
in little-endian binary checkpoint format::

    b"DNCK"                     magic
    u32                         format version
    u32 + bytes                 config fingerprint (ASCII)
    u32 + bytes                 metadata (UTF-8 JSON object)
    u32                         number of records
    per record:
        u32 + bytes             name (UTF-8)
        u32                     rank
        u32 * rank              dimensions
        f32 * prod(dimensions)  row-major payload

The same layout stores model parameters and corpus records.
"""

import collections
import io
import json
import struct

import numpy as np

from unitnorm.core.exceptions import CheckpointError

__all__ = ['Checkpoint', 'MAGIC', 'VERSION', 'dumps', 'loads', 'save', 'load']

MAGIC = b'DNCK'
VERSION = 1

Checkpoint = collections.namedtuple(
    'Checkpoint', ['fingerprint', 'metadata', 'arrays'])


def _write_bytes(stream, value):
    stream.write(struct.pack('<I', len(value)))
    stream.write(value)


def _read(stream, size):
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointError("Checkpoint is truncated")
    return data


def _read_u32(stream):
    return struct.unpack('<I', _read(stream, 4))[0]


def _read_bytes(stream):
    return _read(stream, _read_u32(stream))


def dumps(arrays, fingerprint='', metadata=None):
    """
    Serialize mapping *arrays* of names to arrays into checkpoint bytes.
    Values are stored as 32-bit floats.
    """
    stream = io.BytesIO()
    stream.write(MAGIC)
    stream.write(struct.pack('<I', VERSION))
    _write_bytes(stream, fingerprint.encode('ascii'))
    _write_bytes(stream, json.dumps(metadata or {}, sort_keys=True)
                 .encode('utf-8'))
    stream.write(struct.pack('<I', len(arrays)))
    for name, value in arrays.items():
        value = np.asarray(value)
        if not np.all(np.isfinite(value)):
            raise CheckpointError("Array '%s' contains non-finite values"
                                  % name)
        _write_bytes(stream, name.encode('utf-8'))
        stream.write(struct.pack('<I', value.ndim))
        if value.ndim:
            stream.write(struct.pack('<%dI' % value.ndim, *value.shape))
        stream.write(np.ascontiguousarray(value, dtype='<f4').tobytes())
    return stream.getvalue()


def loads(data):
    """
    Parse checkpoint bytes into :class:`Checkpoint`. Arrays are returned
    as ``float32`` in an ordered mapping. Raise :exc:`CheckpointError`
    on malformed input.
    """
    stream = io.BytesIO(data)
    if stream.read(4) != MAGIC:
        raise CheckpointError("Not a checkpoint, bad magic string")
    version = _read_u32(stream)
    if version != VERSION:
        raise CheckpointError("Unsupported checkpoint version %d" % version)
    try:
        fingerprint = _read_bytes(stream).decode('ascii')
        metadata = json.loads(_read_bytes(stream).decode('utf-8'))
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointError("Malformed checkpoint header: %s" % e)
    arrays = collections.OrderedDict()
    for _ in range(_read_u32(stream)):
        name = _read_bytes(stream).decode('utf-8')
        rank = _read_u32(stream)
        shape = struct.unpack('<%dI' % rank, _read(stream, 4 * rank))
        count = int(np.prod(shape, dtype=np.int64))
        payload = _read(stream, 4 * count)
        arrays[name] = np.frombuffer(payload, dtype='<f4').astype(
            np.float32).reshape(shape)
    if stream.read(1):
        raise CheckpointError("Trailing data after the last record")
    return Checkpoint(fingerprint, metadata, arrays)


def save(path, arrays, fingerprint='', metadata=None):
    with open(path, 'wb') as f:
        f.write(dumps(arrays, fingerprint=fingerprint, metadata=metadata))


def load(path, fingerprint=None):
    """
    Read checkpoint from *path*. When *fingerprint* is given, it must
    match the stored one.
    """
    try:
        with open(path, 'rb') as f:
            checkpoint = loads(f.read())
    except (IOError, OSError) as e:
        raise CheckpointError("Cannot read checkpoint '%s': %s" % (path, e))
    if fingerprint is not None and checkpoint.fingerprint != fingerprint:
        raise CheckpointError(
            "Checkpoint '%s' was written with config %s, expected %s"
            % (path, checkpoint.fingerprint, fingerprint))
    return checkpoint
