"""Deterministic seed derivation shared by all randomized drivers.

Every source of randomness in this package is a ``random.Random`` built from
an integer seed.  Sub-streams (per trial, per phase, per color instance) are
derived from a master seed through one fixed mixing function so that

  * trial ``t`` of a Monte-Carlo run depends only on ``(master_seed, t)``,
  * per-color matcher instances inside the coloring pipeline depend only on
    ``(master_seed, phase, color)``,

and re-running with the same master seed reproduces every decision bit for
bit.  Within one sub-stream the uniforms X_1, X_2, ... are consumed strictly
in arrival order.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Mix an arbitrary tuple of labels/integers into a 64-bit seed.

    SHA-256 of the repr of the parts, truncated to 64 bits.  Stable across
    platforms and Python versions for ints and ASCII strings.
    """
    payload = repr(parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(*parts: object) -> random.Random:
    """Fresh generator for the sub-stream identified by ``parts``."""
    return random.Random(derive_seed(*parts))
