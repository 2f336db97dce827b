"""Model and id-map persistence.

Model file layout (all integers little-endian):

    bytes 0-3    magic "CRSM"
    bytes 4-7    container version (uint32)
    bytes 8-15   manifest length in bytes (uint64)
    manifest     UTF-8 JSON: format_version, scorer kind, n_items, dim,
                 max_len, dropout, byte_order, and a tensor table of
                 {name, shape, dtype, offset, nbytes} entries
    blobs        raw float64 tensors, row-major, little-endian, in manifest
                 order; offsets are relative to the first blob byte

The manifest is self-describing so any language can parse the file.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DataError
from .scorers import ScorerParams

MAGIC = b"CRSM"
CONTAINER_VERSION = 1
FORMAT_VERSION = 1


def save_model(params: ScorerParams, path) -> None:
    names = sorted(params.weights)
    tensors = []
    offset = 0
    for name in names:
        arr = params.weights[name]
        nbytes = arr.size * 8
        tensors.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": "float64",
            "offset": offset,
            "nbytes": nbytes,
        })
        offset += nbytes
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": params.kind,
        "n_items": params.n_items,
        "dim": params.dim,
        "max_len": params.max_len,
        "dropout": params.dropout,
        "readout_window": params.readout_window,
        "byte_order": "little",
        "tensors": tensors,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", CONTAINER_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in names:
            arr = np.ascontiguousarray(params.weights[name], dtype="<f8")
            fh.write(arr.tobytes(order="C"))


def load_model(path) -> ScorerParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise DataError(f"{path}: not a model file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CONTAINER_VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        (manifest_len,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(manifest_len).decode("utf-8"))
        if manifest.get("byte_order") != "little":
            raise DataError(f"{path}: unsupported byte order")
        payload = fh.read()
    weights = {}
    for entry in manifest["tensors"]:
        start = entry["offset"]
        raw = payload[start : start + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(entry["shape"])
        weights[entry["name"]] = arr.copy()
    return ScorerParams(
        kind=manifest["kind"],
        n_items=manifest["n_items"],
        dim=manifest["dim"],
        max_len=manifest["max_len"],
        dropout=manifest["dropout"],
        readout_window=manifest.get("readout_window", 1),
        weights=weights,
    )


def save_id_map(tokens, path) -> None:
    """Line-delimited dense-index <-> original-id map."""
    with open(path, "w", encoding="utf-8") as fh:
        for dense, token in enumerate(tokens):
            fh.write(f"{dense}\t{token}\n")


def load_id_map(path) -> list:
    tokens = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise DataError(f"{path} line {lineno + 1}: expected two columns")
            dense, token = parts
            if int(dense) != lineno:
                raise DataError(f"{path} line {lineno + 1}: indices out of order")
            tokens.append(token)
    return tokens


def load_item_names(path) -> dict:
    """Original-item-token -> display-name table (tab separated)."""
    names = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path} line {lineno}: expected two columns")
            names[parts[0]] = parts[1]
    return names


def dense_item_names(tokens, names_by_token: dict) -> dict:
    """Map dense item ids to display names via the original tokens."""
    return {
        dense: names_by_token[token]
        for dense, token in enumerate(tokens)
        if token in names_by_token
    }
