"""Deterministic, splittable random number generation."""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream key integers must be nonnegative")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"stream key parts must be int or str, got {type(part).__name__}")


class Rng:
    """Keyed family of independent random streams derived from one seed.

    Every distinct key addresses its own counter-based (Philox) stream, so
    adding a consumer (another layer, another worker) never perturbs the
    draws seen by existing consumers. The same seed and the same call
    sequence reproduce the same values bit for bit.
    """

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.seed = int(seed)
        self._streams: dict[tuple, np.random.Generator] = {}

    def stream(self, *key) -> np.random.Generator:
        """Return the stateful generator addressed by ``key``, creating it lazily."""
        if key not in self._streams:
            ss = np.random.SeedSequence(
                entropy=self.seed, spawn_key=tuple(_key_part(k) for k in key)
            )
            self._streams[key] = np.random.Generator(np.random.Philox(ss))
        return self._streams[key]

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"


def gauss_sample(stream: np.random.Generator, mean, std, size=None):
    """Draw from N(mean, std^2); std == 0 returns mean exactly, std < 0 is an error."""
    std = np.asarray(std, dtype=np.float64)
    if np.any(std < 0):
        raise ValueError("standard deviation must be nonnegative")
    if np.all(std == 0):
        mean = np.asarray(mean, dtype=np.float64)
        return mean if size is None else np.broadcast_to(mean, size).copy()
    return np.asarray(mean) + std * stream.standard_normal(
        size if size is not None else np.broadcast(np.asarray(mean), std).shape
    )
