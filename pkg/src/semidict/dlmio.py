"""On-disk formats: DLM1 matrices, sample-batch directories, manifests.

DLM1 is a deliberately dumb binary matrix container::

    bytes 0..7    magic b"DLMATRX1"
    bytes 8..15   rows, little-endian uint64
    bytes 16..23  cols, little-endian uint64
    bytes 24..    row-major float64 payload (little-endian)

A batch directory holds ``samples.dlm`` plus optional ``supports.csv``
(sample_id,index,value rows), ``provenance.csv`` (sample_id,origin) and a
``manifest.json`` describing the generating model.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DLMATRX1"
_HEADER = struct.Struct("<8sQQ")

PROVENANCE_NAMES = {0: "random", 1: "adversarial"}
PROVENANCE_CODES = {v: k for k, v in PROVENANCE_NAMES.items()}


def write_matrix(path: str | Path, mat: np.ndarray) -> None:
    mat = np.ascontiguousarray(mat, dtype="<f8")
    if mat.ndim != 2:
        raise ValueError(f"DLM1 stores 2-d matrices, got shape {mat.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, mat.shape[0], mat.shape[1]))
        fh.write(mat.tobytes(order="C"))


def read_matrix(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated DLM1 header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        payload = fh.read(8 * rows * cols)
        if len(payload) != 8 * rows * cols:
            raise ValueError(f"{path}: payload truncated ({len(payload)} bytes for {rows}x{cols})")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after {rows}x{cols} payload")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()


def write_supports_csv(path: str | Path, support: np.ndarray, values: np.ndarray) -> None:
    """One row per nonzero: sample_id,index,value.  Pads (index < 0) are skipped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "index", "value"])
        for sid in range(support.shape[0]):
            for j, v in zip(support[sid], values[sid]):
                if j >= 0:
                    w.writerow([sid, int(j), repr(float(v))])


def read_supports_csv(path: str | Path, n_samples: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    support = np.full((n_samples, k), -1, dtype=np.int32)
    values = np.zeros((n_samples, k))
    fill = np.zeros(n_samples, dtype=np.int64)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["sample_id", "index", "value"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for sid_s, idx_s, val_s in r:
            sid = int(sid_s)
            pos = fill[sid]
            if pos >= k:
                raise ValueError(f"{path}: sample {sid} has more than {k} nonzeros")
            support[sid, pos] = int(idx_s)
            values[sid, pos] = float(val_s)
            fill[sid] += 1
    return support, values


def write_provenance_csv(path: str | Path, provenance: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "origin"])
        for sid, code in enumerate(provenance):
            w.writerow([sid, PROVENANCE_NAMES[int(code)]])


def read_provenance_csv(path: str | Path) -> np.ndarray:
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for _sid, name in r:
            out.append(PROVENANCE_CODES[name])
    return np.asarray(out, dtype=np.uint8)


def write_manifest(path: str | Path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_batch_dir(
    out_dir: str | Path,
    batch,
    manifest: dict,
    dictionary: np.ndarray | None = None,
) -> dict:
    """Write a batch directory; returns the manifest actually written.

    ``manifest`` supplies the model fields (n, m, k, beta, N, seed,
    value_model, support_models); the ``files`` entry is filled in here.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"samples": "samples.dlm"}
    write_matrix(out / "samples.dlm", batch.samples)
    if batch.support is not None:
        write_supports_csv(out / "supports.csv", batch.support, batch.values)
        files["supports"] = "supports.csv"
    if batch.provenance is not None:
        write_provenance_csv(out / "provenance.csv", batch.provenance)
        files["provenance"] = "provenance.csv"
    if dictionary is not None:
        write_matrix(out / "dictionary.dlm", dictionary)
        files["dictionary"] = "dictionary.dlm"
    manifest = dict(manifest, files=files)
    write_manifest(out / "manifest.json", manifest)
    return manifest


def read_batch_dir(in_dir: str | Path):
    """Load a batch directory written by :func:`write_batch_dir`.

    Returns ``(batch, manifest, dictionary_or_None)``.
    """
    from .sampling import SampleBatch  # local import: sampling depends on streams only

    d = Path(in_dir)
    manifest = read_manifest(d / "manifest.json")
    files = manifest["files"]
    samples = read_matrix(d / files["samples"])
    support = values = provenance = None
    if "supports" in files:
        support, values = read_supports_csv(d / files["supports"], samples.shape[0], manifest["k"])
    if "provenance" in files:
        provenance = read_provenance_csv(d / files["provenance"])
    dictionary = read_matrix(d / files["dictionary"]) if "dictionary" in files else None
    batch = SampleBatch(
        samples=samples,
        m=manifest["m"],
        support=support,
        values=values,
        provenance=provenance,
    )
    return batch, manifest, dictionary
