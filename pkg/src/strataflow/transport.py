"""Byte-exact wire format for inter-process node links.

Frame: magic ``AIOT`` | version 0x01 | msg_type | payload_len (u32 LE) |
payload.  A batch payload is interval_id (u64) | sender (u64) |
entry_count (u32) | per entry: substream (u64), weight (f64), count (u64),
then per item: value (f64), source_seq (u64), source_interval (u64).
All integers little-endian, fixed width.  Entries are written in ascending
substream order so encoding is canonical.
"""

from __future__ import annotations

import struct

from .errors import (BadMagic, CountMismatch, TruncatedPayload,
                     UnknownMessageType, UnsupportedVersion)
from .model import IntervalBatch, Item, MetadataRecord

MAGIC = b"AIOT"
VERSION = 1
MSG_BATCH = 0x01
MSG_HEARTBEAT = 0x02

_FRAME_HEADER = struct.Struct("<4sBBI")
_BATCH_HEADER = struct.Struct("<QQI")
_ENTRY_HEADER = struct.Struct("<QdQ")
_ITEM = struct.Struct("<dQQ")


def encode_batch(batch: IntervalBatch) -> bytes:
    parts = [_BATCH_HEADER.pack(batch.interval_id, batch.sender,
                                len(batch.entries))]
    for sub in sorted(batch.entries):
        meta, items = batch.entries[sub]
        parts.append(_ENTRY_HEADER.pack(sub, meta.weight, meta.count))
        for it in items:
            parts.append(_ITEM.pack(it.value, it.source_seq,
                                    it.source_interval))
    return b"".join(parts)


def decode_batch(payload: bytes) -> IntervalBatch:
    if len(payload) < _BATCH_HEADER.size:
        raise TruncatedPayload(f"payload of {len(payload)} bytes")
    interval_id, sender, n_entries = _BATCH_HEADER.unpack_from(payload, 0)
    off = _BATCH_HEADER.size
    entries = {}
    for _ in range(n_entries):
        if len(payload) < off + _ENTRY_HEADER.size:
            raise TruncatedPayload("entry header cut short")
        sub, weight, count = _ENTRY_HEADER.unpack_from(payload, off)
        off += _ENTRY_HEADER.size
        need = count * _ITEM.size
        if len(payload) < off + need:
            have = (len(payload) - off) // _ITEM.size
            raise CountMismatch(
                f"substream {sub}: declared {count} items, {have} present")
        items = []
        for _ in range(count):
            value, seq, src_interval = _ITEM.unpack_from(payload, off)
            off += _ITEM.size
            items.append(Item(substream=sub, value=value, source_seq=seq,
                              source_interval=src_interval))
        entries[sub] = (MetadataRecord(weight=weight, count=count),
                        tuple(items))
    if off != len(payload):
        raise CountMismatch(f"{len(payload) - off} trailing bytes")
    return IntervalBatch(interval_id=interval_id, sender=sender,
                         entries=entries)


def encode_frame(msg_type: int, payload: bytes) -> bytes:
    if msg_type not in (MSG_BATCH, MSG_HEARTBEAT):
        raise UnknownMessageType(f"msg_type 0x{msg_type:02x}")
    return _FRAME_HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def decode_frame(data: bytes) -> tuple[int, bytes]:
    """Split one complete frame into (msg_type, payload)."""
    if len(data) < _FRAME_HEADER.size:
        raise TruncatedPayload(f"frame of {len(data)} bytes")
    magic, version, msg_type, length = _FRAME_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    if msg_type not in (MSG_BATCH, MSG_HEARTBEAT):
        raise UnknownMessageType(f"msg_type 0x{msg_type:02x}")
    if len(data) < _FRAME_HEADER.size + length:
        raise TruncatedPayload(
            f"payload declares {length} bytes, "
            f"{len(data) - _FRAME_HEADER.size} present")
    payload = data[_FRAME_HEADER.size:_FRAME_HEADER.size + length]
    return msg_type, payload


def encode_batch_frame(batch: IntervalBatch) -> bytes:
    return encode_frame(MSG_BATCH, encode_batch(batch))


def encode_heartbeat(interval_id: int) -> bytes:
    return encode_frame(MSG_HEARTBEAT, struct.pack("<Q", interval_id))


def decode_heartbeat(payload: bytes) -> int:
    if len(payload) != 8:
        raise TruncatedPayload(f"heartbeat payload of {len(payload)} bytes")
    return struct.unpack("<Q", payload)[0]


class FrameReader:
    """Reads complete frames off a blocking socket-like object."""

    def __init__(self, sock):
        self._sock = sock

    def _recv_exact(self, n: int) -> bytes | None:
        buf = b""
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                return None if not buf else buf
            buf += chunk
        return buf

    def read_frame(self) -> tuple[int, bytes] | None:
        """Next (msg_type, payload), or None on clean EOF."""
        header = self._recv_exact(_FRAME_HEADER.size)
        if header is None:
            return None
        if len(header) < _FRAME_HEADER.size:
            raise TruncatedPayload("connection closed mid-header")
        magic, version, msg_type, length = _FRAME_HEADER.unpack(header)
        if magic != MAGIC:
            raise BadMagic(f"magic {magic!r}")
        if version != VERSION:
            raise UnsupportedVersion(f"version {version}")
        if msg_type not in (MSG_BATCH, MSG_HEARTBEAT):
            raise UnknownMessageType(f"msg_type 0x{msg_type:02x}")
        if length == 0:
            return msg_type, b""
        payload = self._recv_exact(length)
        if payload is None or len(payload) < length:
            raise TruncatedPayload("connection closed mid-payload")
        return msg_type, payload
