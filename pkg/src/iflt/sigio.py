"""File formats for ensembles and sequences.

Two interchangeable ensemble formats:

* CSV: one row per component, ``s`` comma-separated values per row, with an
  optional leading header line ``# m=<m> s=<s>``.
* Raw binary: magic ``IFLT``, then three little-endian u32 (version=1, m, s),
  then ``m*s`` little-endian float64 in row-major order.

A sequence manifest is a JSON object ``{"m": .., "s": .., "files": [..]}``
listing ensemble files in order; relative paths resolve against the manifest's
directory.

Data is centered eagerly at ingestion: readers subtract row means unless the
stored data is already centered within tolerance (in which case it is kept
bit-for-bit, so write/read round-trips of centered data are exact).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import InvalidInput, ParseError
from .signals import CENTER_RTOL, Ensemble, SignalSequence, center

MAGIC = b"IFLT"
BIN_VERSION = 1


def _ingest(arr: np.ndarray, center_data: bool) -> Ensemble:
    if not center_data:
        return Ensemble(arr)
    rms = np.sqrt(np.mean(arr**2, axis=1))
    if np.all(np.abs(arr.mean(axis=1)) <= CENTER_RTOL * rms):
        return Ensemble(arr, centered=True)
    return center(Ensemble(arr))


def write_ensemble_csv(path, e: Ensemble, header: bool = True) -> None:
    lines = []
    if header:
        lines.append(f"# m={e.m} s={e.s}")
    for row in e.data:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_ensemble_csv(path, center_data: bool = True) -> Ensemble:
    text = Path(path).read_text()
    rows = []
    declared = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = dict(
                part.split("=", 1) for part in line[1:].split() if "=" in part
            )
            try:
                declared = (int(fields["m"]), int(fields["s"]))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"{path}: bad header line {lineno}") from exc
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError as exc:
            raise ParseError(f"{path}: bad value on line {lineno}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParseError(f"{path}: ragged rows")
    arr = np.asarray(rows, dtype=float)
    if declared is not None and declared != arr.shape:
        raise ParseError(f"{path}: header says {declared}, data is {arr.shape}")
    return _ingest(arr, center_data)


def write_ensemble_bin(path, e: Ensemble) -> None:
    head = MAGIC + struct.pack("<III", BIN_VERSION, e.m, e.s)
    Path(path).write_bytes(head + np.ascontiguousarray(e.data, dtype="<f8").tobytes())


def read_ensemble_bin(path, center_data: bool = True) -> Ensemble:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise ParseError(f"{path}: not an ensemble file (bad magic)")
    version, m, s = struct.unpack("<III", blob[4:16])
    if version != BIN_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    expected = 16 + 8 * m * s
    if len(blob) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, got {len(blob)}")
    arr = np.frombuffer(blob[16:], dtype="<f8").reshape(m, s).copy()
    return _ingest(arr, center_data)


def read_ensemble(path, center_data: bool = True) -> Ensemble:
    """Read either format, sniffing the binary magic."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == MAGIC:
        return read_ensemble_bin(path, center_data)
    return read_ensemble_csv(path, center_data)


def write_manifest(path, files, m: int, s: int) -> None:
    doc = {"m": int(m), "s": int(s), "files": [str(f) for f in files]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON") from exc
    for key in ("m", "s", "files"):
        if key not in doc:
            raise ParseError(f"{path}: manifest missing key {key!r}")
    if not doc["files"]:
        raise ParseError(f"{path}: manifest lists no files")
    return doc


def load_sequence(manifest_path, center_data: bool = True) -> SignalSequence:
    doc = read_manifest(manifest_path)
    base = Path(manifest_path).parent
    items = []
    for rel in doc["files"]:
        p = Path(rel)
        e = read_ensemble(p if p.is_absolute() else base / p, center_data)
        if (e.m, e.s) != (doc["m"], doc["s"]):
            raise ParseError(
                f"{rel}: shape {(e.m, e.s)} does not match manifest {(doc['m'], doc['s'])}"
            )
        items.append(e)
    return SignalSequence(tuple(items))


def save_sequence(out_dir, prefix: str, seq: SignalSequence, fmt: str = "bin") -> Path:
    """Write every ensemble plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt not in ("bin", "csv"):
        raise InvalidInput(f"unknown format {fmt!r}")
    ext = "iflt" if fmt == "bin" else "csv"
    names = []
    for i, e in enumerate(seq.items):
        name = f"{prefix}_{i:04d}.{ext}"
        if fmt == "bin":
            write_ensemble_bin(out / name, e)
        else:
            write_ensemble_csv(out / name, e)
        names.append(name)
    manifest = out / f"{prefix}_manifest.json"
    write_manifest(manifest, names, seq.m, seq.s)
    return manifest
