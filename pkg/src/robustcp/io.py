"""JSON and CSV formats for tensors, decompositions, certificates and samples.

Floats are written with :func:`repr`, which round-trips float64 exactly.
"""
from __future__ import annotations

import csv
import json
import math

import numpy as np

from .spectral import KrankCertificate
from .tensor_core import CPDecomposition, as_tensor


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def tensor_to_dict(t) -> dict:
    t = np.asarray(t, dtype=np.float64)
    return {"shape": list(t.shape), "data": _floats(t)}


def tensor_from_dict(d: dict) -> np.ndarray:
    try:
        shape, data = d["shape"], d["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError("tensor JSON needs 'shape' and 'data'") from exc
    t = as_tensor(data, shape)
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor contains non-finite values")
    return t


def cp_to_dict(cp: CPDecomposition) -> dict:
    return {
        "rank": cp.rank,
        "factors": [{"shape": list(f.shape), "data": _floats(f)} for f in cp.factors],
    }


def cp_from_dict(d: dict) -> CPDecomposition:
    try:
        rank, factors = int(d["rank"]), d["factors"]
    except (KeyError, TypeError) as exc:
        raise ValueError("decomposition JSON needs 'rank' and 'factors'") from exc
    mats = []
    for f in factors:
        shape = tuple(int(s) for s in f["shape"])
        data = np.asarray(f["data"], dtype=np.float64)
        if len(shape) != 2 or data.size != math.prod(shape):
            raise ValueError(f"bad factor shape {shape} for {data.size} values")
        mats.append(data.reshape(shape))
    cp = CPDecomposition(mats)
    if cp.rank != rank:
        raise ValueError(f"declared rank {rank} but factors have {cp.rank} columns")
    return cp


def certificate_to_dict(cert: KrankCertificate) -> dict:
    return cert.to_dict()


def certificate_from_dict(d: dict) -> KrankCertificate:
    return KrankCertificate.from_dict(d)


def dumps(obj: dict) -> str:
    """Canonical JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def load_tensor(path) -> np.ndarray:
    return tensor_from_dict(load_json(path))


def load_cp(path) -> CPDecomposition:
    """Read a decomposition, either bare or as the ``cp`` output of a decompose report."""
    d = load_json(path)
    if isinstance(d, dict) and isinstance(d.get("outputs"), dict) and "cp" in d["outputs"]:
        d = d["outputs"]["cp"]
    return cp_from_dict(d)


def write_samples(path, samples, kind: str) -> None:
    """CSV with a header row.

    ``kind="categorical"``: one integer column per view (``view0, view1, ...``).
    ``kind="real"``: one float column per coordinate (``x0, x1, ...``).
    """
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("samples must be a 2-D array")
    prefix = {"categorical": "view", "real": "x"}[kind]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{prefix}{i}" for i in range(samples.shape[1])])
        for row in samples:
            if kind == "categorical":
                w.writerow([int(v) for v in row])
            else:
                w.writerow([repr(float(v)) for v in row])


def read_samples(path) -> tuple[np.ndarray, str]:
    """Inverse of :func:`write_samples`; the kind is read from the header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty sample file")
    header, body = rows[0], rows[1:]
    if header and all(h.startswith("view") for h in header):
        kind, dtype = "categorical", np.int64
    elif header and all(h.startswith("x") for h in header):
        kind, dtype = "real", np.float64
    else:
        raise ValueError(f"unrecognized sample header {header}")
    if any(len(r) != len(header) for r in body):
        raise ValueError("ragged sample rows")
    try:
        data = np.array(body, dtype=np.float64).reshape(len(body), len(header))
    except ValueError as exc:
        raise ValueError("non-numeric sample entry") from exc
    if kind == "categorical":
        if np.any(data != np.round(data)) or np.any(data < 0):
            raise ValueError("categorical samples must be nonnegative integers")
    return data.astype(dtype), kind
