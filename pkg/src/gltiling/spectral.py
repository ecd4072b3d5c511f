"""Sampled Fourier-domain signals on a uniform grid over 2x2 matrices, and their file formats.

File layout: a magic line, one JSON header line, then the raw payload of
complex samples stored as interleaved ``re, im`` float64 little-endian values
in row-major order over the axes ``(b11, b12, b21, b22)``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

AXES = ("b11", "b12", "b21", "b22")
MAGIC = b"GLTSIGNAL 1\n"
LAYOUT = "interleaved re,im float64 little-endian"


@dataclass
class SpectralSignal:
    """Complex samples on the grid ``linspace(min_k, max_k, counts_k)`` per axis.

    ``flags`` lists flat indices of grid points whose evaluation point was
    perturbed off a tile face.
    """

    mins: np.ndarray
    maxs: np.ndarray
    counts: tuple
    values: np.ndarray
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=float)
        self.maxs = np.asarray(self.maxs, dtype=float)
        self.counts = tuple(int(c) for c in self.counts)
        if len(self.counts) != 4 or min(self.counts) < 2:
            raise ValueError("need four axes with at least two points each")
        if not np.all(self.maxs > self.mins):
            raise ValueError("axis max must exceed axis min")
        self.values = np.asarray(self.values, dtype=np.complex128).reshape(self.counts)
        self.flags = sorted(int(i) for i in self.flags)

    @property
    def spacing(self) -> np.ndarray:
        return (self.maxs - self.mins) / (np.array(self.counts) - 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, k: int) -> np.ndarray:
        return np.linspace(self.mins[k], self.maxs[k], self.counts[k])

    def points(self) -> np.ndarray:
        """All grid points as an array of shape ``(*counts, 2, 2)``."""
        g = np.meshgrid(*(self.axis(k) for k in range(4)), indexing="ij")
        return np.stack(g, axis=-1).reshape(self.counts + (2, 2))

    def like(self, values, flags=None) -> "SpectralSignal":
        """Same grid, new samples."""
        return SpectralSignal(self.mins.copy(), self.maxs.copy(), self.counts, values,
                              self.flags if flags is None else flags)

    def inner(self, other: "SpectralSignal") -> complex:
        """Grid inner product ``dV sum f conj(g)``."""
        return complex(self.cell_volume * np.vdot(other.values, self.values))

    def norm(self) -> float:
        return float(np.sqrt(self.cell_volume) * np.linalg.norm(self.values))

    def header(self) -> dict:
        return {"axes": list(AXES), "min": [float(v) for v in self.mins],
                "max": [float(v) for v in self.maxs], "counts": list(self.counts),
                "endianness": "little", "layout": LAYOUT, "flags": list(self.flags)}

    def save(self, path) -> None:
        payload = np.ascontiguousarray(self.values, dtype="<c16").tobytes()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(json.dumps(self.header(), sort_keys=True).encode() + b"\n")
            fh.write(payload)

    @classmethod
    def load(cls, path) -> "SpectralSignal":
        data = Path(path).read_bytes()
        if not data.startswith(MAGIC):
            raise ValueError("not a spectral signal file")
        end = data.index(b"\n", len(MAGIC))
        head = json.loads(data[len(MAGIC):end])
        if head.get("layout") != LAYOUT or head.get("endianness") != "little":
            raise ValueError("unsupported sample layout")
        counts = tuple(head["counts"])
        values = np.frombuffer(data[end + 1:], dtype="<c16")
        if values.size != int(np.prod(counts)):
            raise ValueError("payload size does not match the header")
        return cls(head["min"], head["max"], counts, values.reshape(counts).astype(np.complex128),
                   head.get("flags", []))


COEFF_COLUMNS = ("lam", "kappa", "mu", "m1", "m2", "m3", "m4", "re", "im")


def write_coefficients_csv(path, blocks: Iterable, threshold: float = 0.0, comment: str = "") -> int:
    """Write coefficients with ``|c| > threshold`` as CSV; returns the row count.

    ``blocks`` yields objects with ``tile`` (a TileIndex), ``m_start`` and ``values``.
    """
    rows = 0
    with open(path, "w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("# " + ",".join(COEFF_COLUMNS) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for blk in blocks:
            idx = np.argwhere(np.abs(blk.values) > threshold)
            mu = int(blk.tile.mu[0, 1])
            for i in idx:
                c = blk.values[tuple(i)]
                m = np.asarray(blk.m_start) + i
                w.writerow([blk.tile.lam, blk.tile.kappa[0], mu, *(int(v) for v in m),
                            repr(float(c.real)), repr(float(c.imag))])
                rows += 1
    return rows


def read_coefficients_csv(path) -> list:
    """Rows of a coefficient CSV as tuples ``(lam, kappa, mu, m1, m2, m3, m4, complex)``."""
    out = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            v = line.strip().split(",")
            out.append(tuple(int(x) for x in v[:7]) + (complex(float(v[7]), float(v[8])),))
    return out
