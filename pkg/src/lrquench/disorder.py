"""Seeded sampling of disordered hopping matrices.

Random numbers come from numpy's Philox4x64-10 counter-based bit generator.
Each realization gets its own key, the first SplitMix64 output from the state
seed + realization_index * G (G = 0x9E3779B97F4A7C15, all arithmetic mod 2^64):

    z = state + G
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

Gaussians are drawn with ``Generator.standard_normal`` starting at counter 0,
so a realization never depends on how many others were drawn before it.
Draw order: circulant model, one value per distance r = 1..L/2; independent
model, the strict upper triangle in row-major order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .model import ModelParams, circulant_from_distances, clean_hopping_entries

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15


class DisorderModel(IntEnum):
    circulant = 0
    independent = 1


def splitmix64(state: int) -> int:
    """First output of SplitMix64 started from ``state``."""
    z = (state + GOLDEN64) & MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def sub_seed(seed: int, realization_index: int) -> int:
    return splitmix64((int(seed) + int(realization_index) * GOLDEN64) & MASK64)


def rng_for(seed: int, realization_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=sub_seed(seed, realization_index)))


def entry_sigma(params: ModelParams, convention: str = "sqrtL") -> float:
    """Per-entry standard deviation.

    ``sqrtL`` (default): sigma J / sqrt(L), the scaling that yields a semicircle
    of radius 2 sigma J for independent entries.
    ``L``: sigma J / L; this shrinks the bulk to zero width as L grows and is
    kept only as an alternative for comparison.
    """
    if convention == "sqrtL":
        return params.sigma * params.J / np.sqrt(params.L)
    if convention == "L":
        return params.sigma * params.J / params.L
    raise ValueError(f"unknown variance convention {convention!r}")


@dataclass(frozen=True)
class DisorderSpec:
    model: DisorderModel
    entry_sigma: float
    seed: int
    realization_index: int = 0

    def __post_init__(self):
        if self.entry_sigma < 0:
            raise ValueError("entry_sigma must be >= 0")
        if self.realization_index < 0:
            raise ValueError("realization_index must be >= 0")

    def at(self, realization_index: int) -> "DisorderSpec":
        return DisorderSpec(self.model, self.entry_sigma, self.seed, realization_index)


def make_spec(params: ModelParams, model="independent", realization_index=0,
              convention="sqrtL") -> DisorderSpec:
    return DisorderSpec(DisorderModel[model] if isinstance(model, str) else DisorderModel(model),
                        entry_sigma(params, convention), params.seed, realization_index)


def periodic_distance(i: int, j: int, L: int) -> int:
    d = abs(i - j)
    return min(d, L - d)


def sample_circulant(params: ModelParams, spec: DisorderSpec) -> np.ndarray:
    """One shared Gaussian hopping per distance; entry (i, j) = -t_dist(i,j)."""
    if spec.model != DisorderModel.circulant:
        raise ValueError("spec.model must be circulant")
    rng = rng_for(spec.seed, spec.realization_index)
    mean_t = -clean_hopping_entries(params)
    t = mean_t + spec.entry_sigma * rng.standard_normal(params.L // 2)
    return circulant_from_distances(-t, params.L, params.mu)


def sample_independent(params: ModelParams, spec: DisorderSpec) -> np.ndarray:
    """Independent Gaussian per unordered pair around the clean matrix."""
    if spec.model != DisorderModel.independent:
        raise ValueError("spec.model must be independent")
    L = params.L
    rng = rng_for(spec.seed, spec.realization_index)
    H = circulant_from_distances(clean_hopping_entries(params), L, params.mu)
    iu = np.triu_indices(L, 1)
    noise = spec.entry_sigma * rng.standard_normal(iu[0].size)
    H[iu] += noise
    H[(iu[1], iu[0])] = H[iu]
    return H


def sample(params: ModelParams, spec: DisorderSpec) -> np.ndarray:
    if spec.model == DisorderModel.circulant:
        return sample_circulant(params, spec)
    return sample_independent(params, spec)


# binary cache: 32-byte little-endian header then float64 row-major data
#   0  4s  magic b"LRQM"
#   4  u4  L
#   8  u4  model enum (0 circulant, 1 independent)
#  12  u4  reserved, zero
#  16  u8  seed
#  24  u8  realization_index
HEADER = struct.Struct("<4sIIIQQ")
MAGIC = b"LRQM"


def save_matrix(path, matrix: np.ndarray, spec: DisorderSpec) -> None:
    m = np.ascontiguousarray(matrix, dtype="<f8")
    L = m.shape[0]
    if m.shape != (L, L):
        raise ValueError("matrix must be square")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, L, int(spec.model), 0, spec.seed, spec.realization_index))
        fh.write(m.tobytes(order="C"))


def load_matrix(path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    magic, L, model, _, seed, idx = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    if data.size != L * L:
        raise ValueError(f"{path}: expected {L * L} values, found {data.size}")
    meta = dict(L=L, model=DisorderModel(model), seed=seed, realization_index=idx)
    return data.reshape(L, L).astype(float), meta
