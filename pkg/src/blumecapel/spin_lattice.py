"""Blume-Capel configurations on an L x L torus.

The Hamiltonian is

    H(sigma) = sum_{<x,y>} (sigma(y) - sigma(x))**2 - h * sum_x sigma(x)

with every unordered nearest-neighbour pair counted once (2 L**2 bonds).
Energies are carried as an integer pair ``(bonds, spin)`` so that
``H = bonds - h * spin`` can be compared exactly; the float value is only
materialised on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

SPIN_VALUES = (-1, 0, 1)
TEXT_CODES = {-1: "m", 0: "z", 1: "p"}
_TEXT_TO_SPIN = {v: k for k, v in TEXT_CODES.items()}


class ParameterError(ValueError):
    """Invalid model parameters."""


class RegimeError(ParameterError):
    """Lattice too small for the low-temperature regime (needs L > n0 + 3)."""


@dataclass(frozen=True)
class ModelParams:
    """Lattice side, external field and inverse temperature.

    ``strict_regime`` enforces ``L > n0 + 3``. With it switched off any
    ``L >= 2`` is accepted and downstream results should be labelled as
    diagnostic.
    """

    L: int
    h: float
    beta: float = 1.0
    strict_regime: bool = True
    n0: int = field(init=False)

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ParameterError(f"L must be an integer >= 2, got {self.L!r}")
        if not (0.0 < self.h < 1.0):
            raise ParameterError(f"h must lie in (0, 1), got {self.h!r}")
        if not (self.beta >= 0.0) or math.isinf(self.beta):
            raise ParameterError(f"beta must be finite and >= 0, got {self.beta!r}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "n0", int(math.floor(2.0 / self.h)))
        if self.strict_regime and not self.L > self.n0 + 3:
            raise RegimeError(
                f"L={self.L} violates L > n0 + 3 = {self.n0 + 3} (h={self.h}); "
                "use diagnostic mode to run anyway"
            )

    @property
    def h_exact(self) -> Fraction:
        return Fraction(str(self.h))

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    @property
    def diagnostic(self) -> bool:
        return not self.strict_regime

    def with_beta(self, beta: float) -> "ModelParams":
        return ModelParams(self.L, self.h, beta, self.strict_regime)


class EnergyParts(NamedTuple):
    """Energy as ``bonds - h * spin`` with integer components."""

    bonds: int
    spin: int

    def value(self, h: float) -> float:
        return float(self.exact(h))

    def exact(self, h: float | Fraction) -> Fraction:
        hf = h if isinstance(h, Fraction) else Fraction(str(h))
        return self.bonds - hf * self.spin

    def __sub__(self, other):  # type: ignore[override]
        return EnergyParts(self.bonds - other.bonds, self.spin - other.spin)

    def __add__(self, other):  # type: ignore[override]
        return EnergyParts(self.bonds + other.bonds, self.spin + other.spin)


def _direction(direction) -> int:
    if direction in ("+", 1, +1):
        return 1
    if direction in ("-", -1):
        return -1
    raise ValueError(f"direction must be '+' or '-', got {direction!r}")


def cycle_value(value: int, direction) -> int:
    """Spin value after one cyclic step -1 -> 0 -> +1 -> -1 (or its inverse)."""
    return (value + 1 + _direction(direction)) % 3 - 1


class SpinConfiguration:
    """Immutable L x L array of spins in {-1, 0, +1} with torus adjacency.

    Sites are 0-based ``(x1, x2)`` pairs, or flat indices ``x1 * L + x2``.
    """

    __slots__ = ("_spins", "_key")

    def __init__(self, spins):
        arr = np.array(spins, dtype=np.int8, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"spins must be a square 2-d array, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValueError("lattice side must be >= 2")
        if not np.isin(arr, SPIN_VALUES).all():
            raise ValueError("spins must take values in {-1, 0, +1}")
        arr.setflags(write=False)
        self._spins = arr
        self._key = None

    # construction -----------------------------------------------------
    @classmethod
    def uniform(cls, L: int, value: int) -> "SpinConfiguration":
        return cls(np.full((L, L), value, dtype=np.int8))

    @classmethod
    def from_sites(cls, L: int, background: int, sites: Iterable, value: int) -> "SpinConfiguration":
        arr = np.full((L, L), background, dtype=np.int8)
        for x1, x2 in sites:
            arr[x1 % L, x2 % L] = value
        return cls(arr)

    @classmethod
    def from_text(cls, text: str) -> "SpinConfiguration":
        rows = [r.strip() for r in text.strip().splitlines() if r.strip()]
        L = len(rows)
        if any(len(r) != L for r in rows):
            raise ValueError("text configuration must have L lines of L characters")
        try:
            return cls([[_TEXT_TO_SPIN[c] for c in r] for r in rows])
        except KeyError as exc:
            raise ValueError(f"unknown spin character {exc.args[0]!r}") from None

    @classmethod
    def from_bytes(cls, L: int, data: bytes) -> "SpinConfiguration":
        n = L * L
        if len(data) != (2 * n + 7) // 8:
            raise ValueError(f"expected {(2 * n + 7) // 8} bytes for L={L}, got {len(data)}")
        raw = np.frombuffer(data, dtype=np.uint8)
        codes = np.stack([(raw >> (2 * k)) & 0b11 for k in range(4)], axis=1).reshape(-1)[:n]
        if (codes > 2).any():
            raise ValueError("invalid 2-bit spin code")
        return cls(codes.astype(np.int8).reshape(L, L) - 1)

    # views ------------------------------------------------------------
    @property
    def spins(self) -> np.ndarray:
        return self._spins

    @property
    def L(self) -> int:
        return self._spins.shape[0]

    def __getitem__(self, site) -> int:
        return int(self._spins[self._coord(site)])

    def _coord(self, site):
        L = self.L
        if isinstance(site, (int, np.integer)):
            if not 0 <= site < L * L:
                raise IndexError(f"site {site} out of range for L={L}")
            return divmod(int(site), L)
        x1, x2 = site
        if not (0 <= x1 < L and 0 <= x2 < L):
            raise IndexError(f"site {site} out of range for L={L}")
        return int(x1), int(x2)

    def neighbors(self, site) -> list[tuple[int, int]]:
        x1, x2 = self._coord(site)
        L = self.L
        return [((x1 + 1) % L, x2), ((x1 - 1) % L, x2), (x1, (x2 + 1) % L), (x1, (x2 - 1) % L)]

    def count(self, value: int) -> int:
        return int(np.count_nonzero(self._spins == value))

    def sites_where(self, values: Sequence[int]) -> list[tuple[int, int]]:
        mask = np.isin(self._spins, list(values))
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(mask))]

    def is_uniform(self, value: int | None = None) -> bool:
        first = int(self._spins.flat[0])
        if value is not None and first != value:
            return False
        return bool((self._spins == first).all())

    # serialization ----------------------------------------------------
    def to_text(self) -> str:
        return "\n".join("".join(TEXT_CODES[int(v)] for v in row) for row in self._spins)

    def to_bytes(self) -> bytes:
        codes = (self._spins.reshape(-1) + 1).astype(np.uint8)
        pad = (-codes.size) % 4
        codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)]).reshape(-1, 4)
        packed = codes[:, 0] | (codes[:, 1] << 2) | (codes[:, 2] << 4) | (codes[:, 3] << 6)
        return packed.astype(np.uint8).tobytes()

    @property
    def key(self) -> bytes:
        if self._key is None:
            self._key = self.L.to_bytes(2, "little") + self.to_bytes()
        return self._key

    def __eq__(self, other):
        if not isinstance(other, SpinConfiguration):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"SpinConfiguration(L={self.L}, text={self.to_text()!r})"

    # moves ------------------------------------------------------------
    def flipped(self, site, direction) -> "SpinConfiguration":
        x = self._coord(site)
        arr = self._spins.copy()
        arr[x] = cycle_value(int(arr[x]), direction)
        return SpinConfiguration(arr)

    def with_values(self, sites: Iterable, value: int) -> "SpinConfiguration":
        arr = self._spins.copy()
        for s in sites:
            arr[self._coord(s)] = value
        return SpinConfiguration(arr)

    def translated(self, d1: int, d2: int) -> "SpinConfiguration":
        return SpinConfiguration(np.roll(self._spins, (d1, d2), axis=(0, 1)))


def _check_dims(sigma: SpinConfiguration, params: ModelParams):
    if sigma.L != params.L:
        raise ValueError(f"configuration has L={sigma.L}, params expect L={params.L}")


def energy_parts(sigma: SpinConfiguration | np.ndarray) -> EnergyParts:
    """Integer components ``(bonds, spin)`` of the energy."""
    s = sigma.spins if isinstance(sigma, SpinConfiguration) else np.asarray(sigma)
    s = s.astype(np.int64)
    bonds = ((np.roll(s, -1, axis=0) - s) ** 2).sum() + ((np.roll(s, -1, axis=1) - s) ** 2).sum()
    return EnergyParts(int(bonds), int(s.sum()))


def energy_parts_batch(spins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(bonds, spin)`` for an array of shape (N, L, L)."""
    s = spins.astype(np.int64)
    bonds = ((np.roll(s, -1, axis=1) - s) ** 2).sum(axis=(1, 2)) + ((np.roll(s, -1, axis=2) - s) ** 2).sum(axis=(1, 2))
    return bonds, s.sum(axis=(1, 2))


def energy_total(sigma: SpinConfiguration, params: ModelParams) -> float:
    _check_dims(sigma, params)
    return energy_parts(sigma).value(params.h)


def delta_parts(sigma: SpinConfiguration, site, direction) -> EnergyParts:
    """Local ``(bond delta, spin delta)`` of the move sigma -> sigma^{x,+-}."""
    x = sigma._coord(site)
    old = int(sigma.spins[x])
    new = cycle_value(old, direction)
    dbond = 0
    for y in sigma.neighbors(x):
        u = int(sigma.spins[y])
        dbond += (new - u) ** 2 - (old - u) ** 2
    return EnergyParts(dbond, new - old)


def energy_delta(sigma: SpinConfiguration, site, direction, params: ModelParams) -> float:
    _check_dims(sigma, params)
    return delta_parts(sigma, site, direction).value(params.h)


def cycle_spin(sigma: SpinConfiguration, site, direction) -> SpinConfiguration:
    return sigma.flipped(site, direction)


def metropolis_rate(delta: float, beta: float) -> float:
    return math.exp(-beta * max(delta, 0.0))


def transition_rate(sigma: SpinConfiguration, site, direction, params: ModelParams) -> float:
    return metropolis_rate(energy_delta(sigma, site, direction, params), params.beta)


def log_gibbs_weight(sigma: SpinConfiguration, params: ModelParams) -> float:
    """``-beta * H(sigma)``; the partition function is not included."""
    return -params.beta * energy_total(sigma, params)


def gibbs_weight(sigma: SpinConfiguration, params: ModelParams) -> float:
    return math.exp(log_gibbs_weight(sigma, params))


def all_moves(L: int):
    """Every (site, direction) pair, 2 L**2 in total."""
    for x1 in range(L):
        for x2 in range(L):
            yield (x1, x2), "+"
            yield (x1, x2), "-"
