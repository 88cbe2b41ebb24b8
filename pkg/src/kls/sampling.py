"""Sample paths from the KL expansion ``X = sum_i Z_i e_i`` with ``Z_i = sqrt(mu_i) xi_i``.

Random streams
--------------
Replicate ``r`` of a run with seed ``s`` draws from its own Philox generator
keyed by ``SeedSequence(s, spawn_key=(r,))``.  Philox is counter based with a
2^256 period, and the substream of a replicate does not depend on which
other replicates are drawn, in what order, or on how many threads are used.
Standard normals come from numpy's ziggurat sampler.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgument
from .grid import Grid
from .spectral import SpectralDecomposition

LAWS = ("Gaussian", "Rademacher", "StudentT")

# replicates per work unit; fixed so results do not depend on the thread count
CHUNK = 512


@dataclass(frozen=True)
class CoefficientLaw:
    """Law of the standardized coefficients ``xi_i`` (mean 0, variance 1, i.i.d.)."""

    name: str = "Gaussian"
    dof: float | None = None

    def __post_init__(self):
        if self.name not in LAWS:
            raise InvalidArgument(f"unknown coefficient law {self.name!r}; choose from {LAWS}")
        if self.name == "StudentT":
            if self.dof is None or not self.dof > 4:
                raise InvalidArgument("StudentT law needs dof > 4 (finite fourth moment)")

    def draw(self, gen: np.random.Generator, size) -> np.ndarray:
        if self.name == "Gaussian":
            return gen.standard_normal(size)
        if self.name == "Rademacher":
            return 2.0 * gen.integers(0, 2, size=size).astype(float) - 1.0
        return gen.standard_t(self.dof, size=size) * math.sqrt((self.dof - 2.0) / self.dof)

    @property
    def fourth_moment(self) -> float:
        if self.name == "Gaussian":
            return 3.0
        if self.name == "Rademacher":
            return 1.0
        return 3.0 * (self.dof - 2.0) / (self.dof - 4.0)

    def to_dict(self) -> dict:
        d = {"name": self.name}
        if self.dof is not None:
            d["dof"] = self.dof
        return d

    @classmethod
    def parse(cls, value) -> "CoefficientLaw":
        if isinstance(value, CoefficientLaw):
            return value
        if isinstance(value, str):
            return cls(value)
        if isinstance(value, dict):
            return cls(value.get("name", "Gaussian"), value.get("dof"))
        raise InvalidArgument(f"cannot interpret {value!r} as a coefficient law")


GAUSSIAN = CoefficientLaw("Gaussian")


def replicate_stream(seed: int, replicate: int) -> np.random.Generator:
    """Independent generator for one replicate of a seeded run."""
    seed = int(seed) % 2**64
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(int(replicate),))))


def resolve_threads(n_jobs: int | None) -> int:
    if n_jobs is None:
        n_jobs = int(os.environ.get("KLS_THREADS", "1") or 1)
    return max(1, int(n_jobs))


def map_replicates(fn, start: int, stop: int, n_jobs: int | None = 1, chunk: int = CHUNK) -> list:
    """Apply ``fn(lo, hi)`` to consecutive replicate chunks; results in chunk order."""
    bounds = [(lo, min(lo + chunk, stop)) for lo in range(start, stop, chunk)]
    n_jobs = resolve_threads(n_jobs)
    if n_jobs == 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def standardized_block(law: CoefficientLaw, rank: int, seed: int, lo: int, hi: int) -> np.ndarray:
    """Standardized draws for replicates ``lo..hi-1``, shape ``(hi - lo, rank)``."""
    out = np.empty((hi - lo, rank))
    for k, r in enumerate(range(lo, hi)):
        out[k] = law.draw(replicate_stream(seed, r), rank)
    return out


def sample_coefficients(dec: SpectralDecomposition, law: CoefficientLaw,
                        stream: np.random.Generator) -> np.ndarray:
    """KL coefficients ``z_i = sqrt(mu_i) xi_i`` with ``xi`` drawn from ``law``."""
    law = CoefficientLaw.parse(law)
    return np.sqrt(dec.mu) * law.draw(stream, dec.rank)


@dataclass(frozen=True, eq=False)
class SamplePath:
    grid: Grid
    values: np.ndarray
    coeffs: np.ndarray
    truncation: int
    seed: int | None = None
    replicate_index: int | None = None


def synthesize_path(dec: SpectralDecomposition, z, m: int | None = None,
                    seed: int | None = None, replicate_index: int | None = None) -> SamplePath:
    """Path values ``sum_{i <= m} z_i e_i(t_j)`` on the grid nodes (``m`` defaults to the rank)."""
    dec.require_efuns()
    z = np.asarray(z, dtype=float)
    if z.shape != (dec.rank,):
        raise InvalidArgument(f"coefficient vector must have length {dec.rank}")
    m = dec.rank if m is None else int(m)
    if not 0 <= m <= dec.rank:
        raise InvalidArgument(f"truncation {m} outside [0, {dec.rank}]")
    values = z[:m] @ dec.efuns[:m] if m > 0 else np.zeros(dec.grid.n)
    return SamplePath(dec.grid, values, z, m, seed, replicate_index)


def sample_batch(dec: SpectralDecomposition, law, m: int | None, replicates: int, seed: int,
                 start: int = 0, n_jobs: int | None = 1) -> list[SamplePath]:
    """Replicates ``start .. start + replicates - 1`` of a seeded batch of paths."""
    dec.require_efuns()
    law = CoefficientLaw.parse(law)
    if replicates < 1:
        raise InvalidArgument("need at least one replicate")
    m = dec.rank if m is None else int(m)
    if not 0 <= m <= dec.rank:
        raise InvalidArgument(f"truncation {m} outside [0, {dec.rank}]")
    sq = np.sqrt(dec.mu)

    def work(lo, hi):
        z = standardized_block(law, dec.rank, seed, lo, hi) * sq
        vals = z[:, :m] @ dec.efuns[:m] if m > 0 else np.zeros((hi - lo, dec.grid.n))
        return [SamplePath(dec.grid, vals[k], z[k], m, seed, lo + k) for k in range(hi - lo)]

    chunks = map_replicates(work, start, start + replicates, n_jobs)
    return [p for c in chunks for p in c]
