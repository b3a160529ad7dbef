"""Versioned binary columnar snapshot of a star schema.

Layout: magic ``SBRD`` + u16 format version + u32 directory length +
JSON directory + raw little-endian column blobs. The directory carries
table/column typing, blob offsets, and dictionary values; numeric vectors
load straight through ``np.frombuffer``, which is what makes reloading a
snapshot far cheaper than re-parsing the CSV.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import SnapshotFormatError
from .star import Column, ColumnTable, Relationship, StarSchema

MAGIC = b"SBRD"
VERSION = 1

_DTYPES = {"int32": "<i4", "int64": "<i8", "float64": "<f8"}


def _column_entry(name: str, col: Column, blobs: list[bytes], offset: int):
    storage = col.storage()
    dtype = {np.dtype(np.int32): "int32", np.dtype(np.int64): "int64", np.dtype(np.float64): "float64"}[
        storage.dtype
    ]
    blob = np.ascontiguousarray(storage).astype(_DTYPES[dtype]).tobytes()
    entry = {
        "name": name,
        "kind": col.kind,
        "dtype": dtype,
        "offset": offset,
        "length": len(storage),
    }
    if col.is_dictionary:
        entry["dictionary"] = list(col.dictionary)
    blobs.append(blob)
    return entry, offset + len(blob)


def write_snapshot(schema: StarSchema, path) -> None:
    blobs: list[bytes] = []
    offset = 0
    tables = []
    for role, table in [("fact", schema.fact)] + [
        ("dimension", dim) for dim in schema.dimensions.values()
    ]:
        cols = []
        for name in table.columns:
            entry, offset = _column_entry(name, table.columns[name], blobs, offset)
            cols.append(entry)
        tables.append(
            {"name": table.name, "role": role, "key_column": table.key_column, "columns": cols}
        )
    directory = {
        "meta": schema.meta,
        "tables": tables,
        "relationships": [
            {"fact_column": r.fact_column, "dimension": r.dimension, "dimension_key": r.dimension_key}
            for r in schema.relationships
        ],
    }
    header = json.dumps(directory, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_snapshot(path) -> StarSchema:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SnapshotFormatError(f"{path}: not a snapshot (bad magic)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported snapshot version {version}")
    (header_len,) = struct.unpack_from("<I", data, 6)
    header_start = 10
    body_start = header_start + header_len
    try:
        directory = json.loads(data[header_start:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise SnapshotFormatError(f"{path}: corrupt directory ({err})") from None

    fact = None
    dimensions = {}
    for tdoc in directory["tables"]:
        columns = {}
        for cdoc in tdoc["columns"]:
            dtype = _DTYPES[cdoc["dtype"]]
            start = body_start + cdoc["offset"]
            end = start + cdoc["length"] * np.dtype(dtype).itemsize
            vector = np.frombuffer(data[start:end], dtype=dtype)
            if "dictionary" in cdoc:
                col = Column(cdoc["kind"], codes=vector, dictionary=cdoc["dictionary"])
            else:
                col = Column(cdoc["kind"], values=vector)
            columns[cdoc["name"]] = col
        table = ColumnTable(tdoc["name"], columns, key_column=tdoc.get("key_column"))
        if tdoc["role"] == "fact":
            fact = table
        else:
            dimensions[tdoc["name"]] = table
    if fact is None:
        raise SnapshotFormatError(f"{path}: snapshot has no fact table")
    relationships = [
        Relationship(r["fact_column"], r["dimension"], r["dimension_key"])
        for r in directory["relationships"]
    ]
    return StarSchema(fact, dimensions, relationships, directory.get("meta") or {})
