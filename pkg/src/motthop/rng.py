"""Deterministic stream derivation from a single master seed.

Every random draw in the package flows through one 64-bit master seed.
Sub-streams are derived with ``numpy.random.SeedSequence`` spawn keys built
from purpose strings (hashed to 32-bit ints) and integer path components, so

* the same (seed, purpose, indices) always yields the same stream,
* distinct purposes or indices yield statistically independent streams,
* draws for coordinate k of an environment do not depend on the order in
  which coordinates are materialized.

The bit generator is Philox (counter based), so spawning many short streams
is cheap.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive_seed_sequence", "spawn_generator", "derive_int", "zigzag"]


def zigzag(k: int) -> int:
    """Map a signed integer to a non-negative one (0,-1,1,-2,2 -> 0,1,2,3,4)."""
    return 2 * k if k >= 0 else -2 * k - 1


def _path_component(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    if part < 0:
        raise ValueError(f"negative path component {part}; zigzag signed indices first")
    return int(part)


def derive_seed_sequence(master: int, *path: int | str) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream identified by ``path`` under ``master``."""
    key = tuple(_path_component(p) for p in path)
    return np.random.SeedSequence(entropy=int(master), spawn_key=key)


def spawn_generator(master: int, *path: int | str) -> np.random.Generator:
    """Philox-backed Generator for the given purpose path."""
    return np.random.Generator(np.random.Philox(derive_seed_sequence(master, *path)))


def derive_int(master: int, *path: int | str) -> int:
    """A stable 64-bit integer derived from (master, path), usable as a seed."""
    state = derive_seed_sequence(master, *path).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])
