"""Binary checkpoint container.

Layout (little-endian): magic "STGC", version u16, a 32-byte
architecture fingerprint, record count u32, then length-prefixed
records: name_len u16, name utf-8, dtype tag u8, rank u8, rank x u32
dims, raw payload.  Tag 3 marks opaque byte records (JSON documents);
their single dim is the byte length.

The fingerprint is the sha256 of the canonical architecture document
(layer specs, node count, class count, head mode) and is re-verified on
load, so a checkpoint cannot silently rebuild a different network.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

from .errors import FormatError, FingerprintMismatchError, ValidationError
from .facegraph import FaceGraphSpec
from .model import StgcnNetwork, layer_specs_from_meta
from .optim import AdamState

MAGIC = b"STGC"
VERSION = 1

_DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_TAG_BYTES = 3


def _tag_for(arr: np.ndarray) -> int:
    for tag, dt in _DTYPE_TAGS.items():
        if arr.dtype == dt:
            return tag
    raise ValidationError("checkpoint", f"unsupported dtype {arr.dtype}")


def canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def fingerprint_of(arch_meta: dict) -> bytes:
    return hashlib.sha256(canonical_json(arch_meta)).digest()


def _pack_record(name: str, payload: bytes, tag: int, dims: tuple) -> bytes:
    name_b = name.encode("utf-8")
    parts = [struct.pack("<H", len(name_b)), name_b,
             struct.pack("<BB", tag, len(dims))]
    for d in dims:
        parts.append(struct.pack("<I", d))
    parts.append(payload)
    return b"".join(parts)


def write_records(path, records: dict, fingerprint: bytes):
    """records: name -> ndarray or bytes; written atomically."""
    blob = [MAGIC, struct.pack("<H", VERSION), fingerprint,
            struct.pack("<I", len(records))]
    for name, value in records.items():
        if isinstance(value, (bytes, bytearray)):
            blob.append(_pack_record(name, bytes(value), _TAG_BYTES,
                                     (len(value),)))
        else:
            arr = np.asarray(value)
            tag = _tag_for(arr)
            payload = np.ascontiguousarray(arr, dtype=_DTYPE_TAGS[tag]).tobytes()
            blob.append(_pack_record(name, payload, tag, arr.shape))
    data = b"".join(blob)
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               prefix=".stgc-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_records(path):
    """-> (records dict, fingerprint bytes)."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 + 2 + 32 + 4:
        raise FormatError(FormatError.TRUNCATED, f"{path}: header incomplete")
    if data[:4] != MAGIC:
        raise FormatError(FormatError.BAD_MAGIC,
                          f"{path}: not a checkpoint file (magic {data[:4]!r})")
    version = struct.unpack_from("<H", data, 4)[0]
    if version != VERSION:
        raise FormatError(FormatError.BAD_VERSION,
                          f"{path}: unsupported version {version}")
    fingerprint = data[6:38]
    count = struct.unpack_from("<I", data, 38)[0]
    offset = 42
    records = {}
    for _ in range(count):
        try:
            name_len = struct.unpack_from("<H", data, offset)[0]
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            if len(data[offset:offset + name_len]) != name_len:
                raise struct.error("short name")
            offset += name_len
            tag, rank = struct.unpack_from("<BB", data, offset)
            offset += 2
            dims = []
            for _ in range(rank):
                dims.append(struct.unpack_from("<I", data, offset)[0])
                offset += 4
        except struct.error as exc:
            raise FormatError(FormatError.TRUNCATED,
                              f"{path}: record header cut short") from exc
        if tag == _TAG_BYTES:
            size = dims[0] if dims else 0
            payload = data[offset:offset + size]
            if len(payload) != size:
                raise FormatError(FormatError.TRUNCATED,
                                  f"{path}: record {name!r} payload cut short")
            records[name] = payload
            offset += size
        else:
            if tag not in _DTYPE_TAGS:
                raise FormatError(FormatError.CORRUPT,
                                  f"{path}: record {name!r} has unknown dtype tag {tag}")
            dt = _DTYPE_TAGS[tag]
            n_items = 1
            for d in dims:
                n_items *= d
            size = n_items * dt.itemsize
            payload = data[offset:offset + size]
            if len(payload) != size:
                raise FormatError(FormatError.TRUNCATED,
                                  f"{path}: record {name!r} payload cut short")
            records[name] = np.frombuffer(payload, dtype=dt).reshape(dims).copy()
            offset += size
    if offset != len(data):
        raise FormatError(FormatError.CORRUPT,
                          f"{path}: {len(data) - offset} trailing bytes")
    return records, fingerprint


def save_checkpoint(net: StgcnNetwork, path, meta: dict | None = None,
                    optimizer: AdamState | None = None,
                    extra_arrays: dict | None = None):
    """Parameters, running stats, architecture, and optional train state."""
    arch = net.arch_meta()
    records: dict = {"__arch__": canonical_json(arch)}
    records.update(net.state_arrays())
    if meta is not None:
        records["__meta__"] = canonical_json(meta)
    if optimizer is not None:
        records["__opt__"] = canonical_json({
            "step": optimizer.step, "beta1": optimizer.beta1,
            "beta2": optimizer.beta2, "eps": optimizer.eps,
            "names": sorted(optimizer.m),
        })
        # sorted so the byte layout is independent of dict insertion order
        # (a freshly built state and one loaded from disk differ there)
        for name in sorted(optimizer.m):
            records[f"opt.m.{name}"] = optimizer.m[name]
        for name in sorted(optimizer.v):
            records[f"opt.v.{name}"] = optimizer.v[name]
    if extra_arrays:
        records.update(extra_arrays)
    write_records(path, records, fingerprint_of(arch))


def load_checkpoint(path, graph: FaceGraphSpec, expect_k: int | None = None,
                    expect_head_mode: str | None = None):
    """-> (network, meta dict or None, AdamState or None, records).

    The stored fingerprint must match the embedded architecture, and the
    architecture must match the provided graph and any caller
    expectations.
    """
    records, fingerprint = read_records(path)
    if "__arch__" not in records:
        raise FormatError(FormatError.CORRUPT, f"{path}: missing architecture record")
    arch = json.loads(records["__arch__"].decode("utf-8"))
    if fingerprint_of(arch) != fingerprint:
        raise FingerprintMismatchError("fingerprint does not match stored architecture")
    if arch["node_count"] != graph.node_count:
        raise FingerprintMismatchError(
            f"checkpoint is for {arch['node_count']} nodes, graph has {graph.node_count}")
    if expect_k is not None and arch["k"] != expect_k:
        raise FingerprintMismatchError(
            f"checkpoint has {arch['k']} classes, expected {expect_k}")
    if expect_head_mode is not None and arch["head_mode"] != expect_head_mode:
        raise FingerprintMismatchError(
            f"checkpoint head mode {arch['head_mode']!r}, expected {expect_head_mode!r}")

    net = StgcnNetwork(graph, layer_specs_from_meta(arch), arch["k"],
                       arch["head_mode"], seed=0,
                       in_channels=arch["in_channels"])
    net.load_state_arrays(records)

    meta = None
    if "__meta__" in records:
        meta = json.loads(records["__meta__"].decode("utf-8"))
    optimizer = None
    if "__opt__" in records:
        opt_doc = json.loads(records["__opt__"].decode("utf-8"))
        optimizer = AdamState(step=int(opt_doc["step"]),
                              beta1=float(opt_doc["beta1"]),
                              beta2=float(opt_doc["beta2"]),
                              eps=float(opt_doc["eps"]))
        for name in opt_doc["names"]:
            optimizer.m[name] = records[f"opt.m.{name}"]
            optimizer.v[name] = records[f"opt.v.{name}"]
    return net, meta, optimizer, records
