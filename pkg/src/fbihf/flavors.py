"""Flavor structure: band-space bases, generators, and symmetry blocks.

Basis orderings per flavor:
  spinless     (band0, band1), size 2
  valley       (valley+ band0, valley+ band1, valley- band0, valley- band1), size 4
  valley_spin  valley basis tensor (up, down), spin innermost, size 8

The valley permutation Pi swaps positions so states sharing a Chern-number
eigenvalue sit in adjacent 2x2 (or 4x4) blocks; the orbit unitaries are
block diagonal in the Pi-permuted basis.
"""

from __future__ import annotations

import numpy as np

FLAVORS = ("spinless", "valley", "valley_spin")


def block_size(flavor: str) -> int:
    return {"spinless": 2, "valley": 4, "valley_spin": 8}[flavor]


def orbit_block_size(flavor: str) -> int:
    """Size n of each U(n) factor in the orbit group U(n) x U(n)."""
    return {"spinless": 1, "valley": 2, "valley_spin": 4}[flavor]


def generators(flavor: str) -> list[np.ndarray]:
    """Diagonal seed projectors of the ground-state orbits (2/3/5 per flavor).

    For valley_spin the published spin-major patterns are reordered to the
    spin-innermost basis used here; the five classes are distinguished by
    their rank split across the two Chern blocks (4,0), (3,1), (2,2), (1,3),
    (0,4).
    """
    if flavor == "spinless":
        pats = [(1, 0), (0, 1)]
    elif flavor == "valley":
        pats = [(1, 0, 0, 1), (1, 1, 0, 0), (0, 1, 1, 0)]
    elif flavor == "valley_spin":
        pats = [(1, 1, 0, 0, 0, 0, 1, 1),
                (1, 1, 1, 0, 0, 0, 1, 0),
                (1, 0, 1, 0, 1, 0, 1, 0),
                (0, 0, 0, 1, 1, 1, 0, 1),
                (0, 0, 1, 1, 1, 1, 0, 0)]
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    return [np.diag(np.array(p, dtype=float)) for p in pats]


def chern_operator(flavor: str) -> np.ndarray:
    """Diagonal Chern-number operator; valley flavors only."""
    if flavor == "valley":
        return np.diag([1.0, -1.0, -1.0, 1.0])
    if flavor == "valley_spin":
        return np.kron(np.diag([1.0, -1.0, -1.0, 1.0]), np.eye(2))
    raise ValueError(f"chern operator undefined for flavor {flavor!r}")


def valley_permutation(flavor: str) -> np.ndarray:
    """Permutation Pi grouping equal-Chern positions into contiguous blocks.

    Pi is symmetric and squares to the identity; Pi C Pi = diag(+I, -I)
    where C is the Chern operator.
    """
    if flavor == "spinless":
        return np.eye(2)
    base = np.zeros((4, 4))
    for row, col in enumerate((0, 3, 2, 1)):
        base[row, col] = 1.0
    if flavor == "valley":
        return base
    if flavor == "valley_spin":
        return np.kron(base, np.eye(2))
    raise ValueError(f"valley permutation undefined for flavor {flavor!r}")
