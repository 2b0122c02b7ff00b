"""Finite base measures, discrete random measures and Dirichlet-process draws.

Conventions
-----------
Outcomes live on (0, inf).  Measures on the observed-data space additionally
carry the missingness symbol, which is encoded as the location ``0.0``
(matching the ``x = r * y`` storage convention of the data files).  Measures
on the outcome space must have strictly positive locations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .stochastic import RngLike, as_generator

__all__ = [
    "MISSING",
    "BaseMeasure",
    "DiscreteMeasure",
    "GroupedSample",
    "dp_posterior_base",
    "dp_draw",
]

#: Location value encoding the missingness symbol on the observed-data space.
MISSING = 0.0


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BaseMeasure:
    """Finite Borel base measure: continuous part plus optional atoms.

    The continuous part is ``continuous_mass`` times a normalised density
    with matching sampler.  Total mass is the sum of the continuous mass and
    the atom masses by construction.
    """

    continuous_mass: float = 0.0
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sample_continuous: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    atom_locations: np.ndarray = field(default_factory=lambda: np.empty(0))
    atom_masses: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "atom_locations", _readonly(self.atom_locations))
        object.__setattr__(self, "atom_masses", _readonly(self.atom_masses))
        if self.continuous_mass < 0:
            raise ParameterError("continuous mass must be nonnegative")
        if self.continuous_mass > 0 and (self.density is None or self.sample_continuous is None):
            raise ParameterError("a continuous part needs a density and a sampler")
        if self.atom_locations.shape != self.atom_masses.shape:
            raise ParameterError("atom locations and masses must align")
        if np.any(self.atom_masses < 0):
            raise ParameterError("atom masses must be nonnegative")
        if self.total_mass <= 0:
            raise ParameterError("base measure must have positive total mass")

    @property
    def total_mass(self) -> float:
        return float(self.continuous_mass + self.atom_masses.sum())

    @property
    def is_atomless(self) -> bool:
        return self.atom_masses.size == 0

    def continuous_density(self, x: np.ndarray) -> np.ndarray:
        """Lebesgue density of the continuous part (mass times normalised pdf)."""
        if self.continuous_mass == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.continuous_mass * np.asarray(self.density(np.asarray(x, dtype=float)))

    def sample_normalised(self, rng: RngLike, size: int) -> np.ndarray:
        """i.i.d. draws from the probability measure obtained by normalising."""
        gen = as_generator(rng)
        out = np.empty(size)
        cut = np.concatenate([np.cumsum(self.atom_masses), [self.total_mass]])
        u = gen.random(size) * self.total_mass
        idx = np.searchsorted(cut, u, side="right")
        cont = idx >= self.atom_masses.size
        n_cont = int(cont.sum())
        if self.atom_masses.size:
            out[~cont] = self.atom_locations[np.minimum(idx[~cont], self.atom_masses.size - 1)]
        if n_cont:
            out[cont] = self.sample_continuous(gen, n_cont)
        return out

    def with_atoms(self, locations: np.ndarray, masses: np.ndarray) -> "BaseMeasure":
        """New measure with extra atom mass added (duplicates accumulate)."""
        loc = np.concatenate([self.atom_locations, np.asarray(locations, dtype=float)])
        mas = np.concatenate([self.atom_masses, np.asarray(masses, dtype=float)])
        uniq, inv = np.unique(loc, return_inverse=True)
        acc = np.zeros_like(uniq)
        np.add.at(acc, inv, mas)
        return BaseMeasure(self.continuous_mass, self.density, self.sample_continuous,
                           uniq, acc)


def point_mass_base(location: float, mass: float) -> BaseMeasure:
    """Base measure consisting of a single atom."""
    return BaseMeasure(atom_locations=np.array([location]), atom_masses=np.array([mass]))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atom list; draws of random measures and empirical measures.

    ``locations == 0.0`` marks the missingness symbol and is only legal for
    measures on the observed-data space (``on_outcomes=False``).
    """

    locations: np.ndarray
    weights: np.ndarray
    normalized: bool = True
    on_outcomes: bool = False

    def __post_init__(self):
        object.__setattr__(self, "locations", _readonly(self.locations))
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.locations.shape != self.weights.shape or self.locations.ndim != 1:
            raise ParameterError("locations and weights must be equal-length 1-D arrays")
        if np.any(self.weights < 0):
            raise ParameterError("weights must be nonnegative")
        if self.normalized and abs(self.weights.sum() - 1.0) > 1e-12:
            raise ParameterError("normalized measure must have weights summing to 1")
        if self.on_outcomes and np.any(self.locations <= 0):
            raise ParameterError("outcome-space measures need strictly positive locations")

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, np.asarray(fn(self.locations), dtype=float)))

    def mass_of(self, mask: np.ndarray) -> float:
        return float(self.weights[mask].sum())

    def normalised(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.locations, self.weights / self.total,
                               normalized=True, on_outcomes=self.on_outcomes)

    @staticmethod
    def empirical(values: np.ndarray, on_outcomes: bool = True) -> "DiscreteMeasure":
        values = np.asarray(values, dtype=float)
        return DiscreteMeasure(values, np.full(values.size, 1.0 / values.size),
                               on_outcomes=on_outcomes)


@dataclass(frozen=True)
class GroupedSample:
    """A sample reduced to its distinct values and multiplicities.

    Ties are decided by exact floating-point equality: continuous data has no
    ties almost surely, while resampled atoms inside the Gibbs engine tie
    exactly by construction.
    """

    values: tuple
    counts: tuple

    def __post_init__(self):
        if len(self.values) != len(self.counts) or not self.values:
            raise ParameterError("grouped sample needs aligned, nonempty values/counts")
        if any(c < 1 for c in self.counts):
            raise ParameterError("multiplicities must be >= 1")

    @staticmethod
    def from_sample(values) -> "GroupedSample":
        vals, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
        return GroupedSample(tuple(vals.tolist()), tuple(int(c) for c in counts))

    @property
    def n(self) -> int:
        return int(sum(self.counts))

    @property
    def k(self) -> int:
        return len(self.values)

    def values_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def counts_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)


# ---------------------------------------------------------------------------
# Dirichlet-process machinery


def dp_posterior_base(prior: BaseMeasure, data) -> BaseMeasure:
    """Posterior base measure: prior plus a unit atom per data point."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        return prior
    return prior.with_atoms(data, np.ones(data.size))


def dp_draw(base: BaseMeasure, trunc_eps: float, rng: RngLike) -> DiscreteMeasure:
    """One Dirichlet-process draw via truncated stick breaking.

    Sticks are Beta(1, M) for M the total base mass, sampled through the
    exact inverse-CDF transform 1 - exp(-E/M) of unit exponentials, which
    lets the whole stick sequence be generated in vectorised blocks.  The
    sum of stick lengths is truncated once the residual mass drops below
    ``trunc_eps``; the residual is assigned to one final atom drawn from the
    normalised base, so the returned weights sum to one exactly.
    """
    if not (0 < trunc_eps < 1):
        raise ParameterError("trunc_eps must lie in (0, 1)")
    M = base.total_mass
    gen = as_generator(rng)

    target = -np.log(trunc_eps)  # stop once cumulative -log(1-V) exceeds this
    blocks = []
    total = 0.0
    guess = int(M * target * 1.1) + 32
    while True:
        e = gen.standard_exponential(guess) / M
        s = np.cumsum(e) + total
        hit = np.searchsorted(s, target, side="right")
        if hit < e.size:
            blocks.append(s[:hit + 1])
            break
        blocks.append(s)
        total = s[-1]
        guess = max(32, guess // 4)
    s = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]

    log_resid_before = np.concatenate([[0.0], -s[:-1]])
    stick = -np.expm1(-np.diff(np.concatenate([[0.0], s])))  # Beta(1, M) sticks
    weights = np.empty(s.size + 1)
    weights[:-1] = stick * np.exp(log_resid_before)
    weights[-1] = np.exp(-s[-1])  # residual mass -> one closing atom
    weights /= weights.sum()  # telescopes to 1 exactly; squash fp drift

    locations = base.sample_normalised(gen, weights.size)
    return DiscreteMeasure(locations, weights, normalized=True)
