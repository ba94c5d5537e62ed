"""Slice state and multi-slice stack containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridError, Lattice, ScalarField, SymTensor2Field


@dataclass(frozen=True)
class AdmState:
    """One CMC slice: mean-curvature time t, 3-metric, second fundamental
    form, lapse, and optionally the lapse time derivative."""

    t: float
    g: SymTensor2Field
    k: SymTensor2Field
    n: ScalarField
    n_dot: ScalarField | None = None

    def __post_init__(self):
        if not (self.g.lattice == self.k.lattice == self.n.lattice):
            raise GridError("AdmState fields live on different lattices")
        if np.any(self.n.data <= 0):
            raise GridError("lapse must be positive everywhere")

    @property
    def lattice(self) -> Lattice:
        return self.g.lattice


@dataclass(frozen=True)
class SpacetimeStack:
    """Five consecutive AdmStates at uniform spacing, for centered time
    differencing of 4D covariant operators at the middle slice."""

    slices: tuple

    def __post_init__(self):
        if len(self.slices) != 5:
            raise GridError(f"stack needs 5 slices, got {len(self.slices)}")
        lat = self.slices[0].lattice
        times = np.array([s.t for s in self.slices])
        if any(s.lattice != lat for s in self.slices):
            raise GridError("stack slices on different lattices")
        if np.any(np.diff(times) <= 0):
            raise GridError("stack times must be strictly increasing")
        deltas = np.diff(times)
        if np.max(np.abs(deltas - deltas[0])) > 1e-12 * max(1.0, abs(deltas[0])):
            raise GridError("stack spacing not uniform to 1e-12")

    @property
    def center(self) -> AdmState:
        return self.slices[2]

    @property
    def delta(self) -> float:
        return self.slices[1].t - self.slices[0].t

    @property
    def lattice(self) -> Lattice:
        return self.slices[0].lattice
