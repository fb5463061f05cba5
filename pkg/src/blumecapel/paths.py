"""Energy barriers and explicit low-energy paths between stable configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .droplet_geometry import classify_critical, enumerate_critical_set
from .spin_lattice import EnergyParts, ModelParams, SpinConfiguration, energy_parts


@dataclass(frozen=True)
class BarrierReport:
    """Critical-droplet barrier above the metastable background.

    Attributes:
        Gamma: energy of a critical droplet minus that of the background.
        components: the same difference as integer ``(bonds, spin)``.
        theta_hat: asymptotic lifetime scale ``exp(beta Gamma) 3 / (4 (2 n0 + 1) L^2)``.
        log_theta_hat: natural log of ``theta_hat``.
        Gamma_zero: the barrier for the 0 -> +1 transition.
    """

    Gamma: float
    components: tuple[int, int]
    theta_hat: float
    log_theta_hat: float
    Gamma_zero: float
    components_zero: tuple[int, int]


def critical_witness(params: ModelParams, background: int = -1) -> SpinConfiguration:
    """One explicit configuration of the attached critical set."""
    return next(iter(enumerate_critical_set("R_a", params, background)))


def log_theta_hat(params: ModelParams, gamma: float) -> float:
    n0 = params.n0
    return params.beta * gamma + math.log(3.0 / (4 * (2 * n0 + 1) * params.L**2))


def barrier_gamma(params: ModelParams) -> BarrierReport:
    L = params.L
    parts = energy_parts(critical_witness(params, -1)) - energy_parts(SpinConfiguration.uniform(L, -1))
    parts0 = energy_parts(critical_witness(params, 0)) - energy_parts(SpinConfiguration.uniform(L, 0))
    gamma = parts.value(params.h)
    lt = log_theta_hat(params, gamma)
    return BarrierReport(gamma, (parts.bonds, parts.spin), math.exp(lt), lt, parts0.value(params.h), (parts0.bonds, parts0.spin))


def gamma_formula(params: ModelParams) -> EnergyParts:
    """Closed form ``4 (n0 + 1) - h (n0 (n0 + 1) + 1)`` as integer parts."""
    n0 = params.n0
    return EnergyParts(4 * (n0 + 1), n0 * (n0 + 1) + 1)


# ---------------------------------------------------------------------------
# paths


@dataclass
class Path:
    """Sequence of configurations joined by single cyclic spin steps."""

    configs: list
    stages: list  # indices into ``configs`` of the coarse stage endpoints

    def __len__(self):
        return len(self.configs) - 1

    def energies(self) -> list[EnergyParts]:
        return [energy_parts(c) for c in self.configs]

    def is_valid(self) -> bool:
        for a, b in zip(self.configs, self.configs[1:]):
            diff = (a.spins != b.spins).nonzero()
            if len(diff[0]) != 1:
                return False
            x = (int(diff[0][0]), int(diff[1][0]))
            if b not in (a.flipped(x, "+"), a.flipped(x, "-")):
                return False
        return True

    def max_energy(self, h: float) -> EnergyParts:
        return max(self.energies(), key=lambda e: e.exact(h))


def _step_to(path: list, site, value: int):
    cur = path[-1]
    if cur[site] == value:
        raise ValueError(f"site {site} already holds {value}")
    nxt = cur.with_values([site], value)
    if nxt not in (cur.flipped(site, "+"), cur.flipped(site, "-")):
        raise ValueError("value change is not a single cyclic step")
    path.append(nxt)


def _add_line(path: list, cells, value: int):
    for c in cells:
        _step_to(path, c, value)


def reference_path_gamma0(params: ModelParams) -> Path:
    """Grow a 0-droplet from the all -1 configuration to the ``L x (L-2)`` band.

    Stage 1 is a 2x2 square; afterwards rows and columns are added in turn
    (j x j -> (j+1) x j -> (j+1) x (j+1)) up to ``(L-2) x (L-2)``, and the
    last stage extends that square to a band wrapping the torus. Lines are
    filled starting next to a corner so every added spin after the first
    has two 0 neighbours.
    """
    L = params.L
    configs = [SpinConfiguration.uniform(L, -1)]
    stages = [0]
    _add_line(configs, [(0, 0), (0, 1), (1, 0), (1, 1)], 0)
    stages.append(len(configs) - 1)
    rows, cols = 2, 2
    while not (rows == L - 2 and cols == L - 2):
        if rows == cols:
            _add_line(configs, [(rows, c) for c in range(cols)], 0)
            rows += 1
        else:
            _add_line(configs, [(r, cols) for r in range(rows)], 0)
            cols += 1
        stages.append(len(configs) - 1)
    for r in (L - 2, L - 1):
        _add_line(configs, [(r, c) for c in range(cols)], 0)
    stages.append(len(configs) - 1)
    return Path(configs, stages)


def band_configuration(L: int) -> SpinConfiguration:
    """``L x (L-2)`` band of 0 spins next to an ``L x 2`` band of -1 spins."""
    return SpinConfiguration.from_sites(L, -1, [(r, c) for r in range(L) for c in range(L - 2)], 0)


def descent_path(xi: SpinConfiguration, params: ModelParams) -> Path:
    """Path from a critical droplet down to the uniform background.

    The attached spin is removed first; then the rectangle loses lines of
    its short length from the end of its long side until it is 2x2, and the
    square is taken apart one spin at a time. Reversed, each piece is the
    droplet-growth step of the reference path.
    """
    cls = classify_critical(xi, -1, params)
    if "R_a" not in cls:
        raise ValueError("descent_path needs a configuration with an attached critical droplet")
    configs = [xi]
    _step_to(configs, cls.extra_site, -1)
    stages = [0, 1]
    rect = cls.rectangle
    L = params.L
    r0, c0, a, b = rect.r0, rect.c0, rect.a, rect.b
    while a * b > 4:
        if a >= b:
            # drop the last row (length b), starting from a corner
            _add_line(configs, [((r0 + a - 1) % L, (c0 + j) % L) for j in range(b)], -1)
            a -= 1
        else:
            _add_line(configs, [((r0 + i) % L, (c0 + b - 1) % L) for i in range(a)], -1)
            b -= 1
        stages.append(len(configs) - 1)
    cells = [(r0 % L, c0 % L), (r0 % L, (c0 + 1) % L), ((r0 + 1) % L, c0 % L), ((r0 + 1) % L, (c0 + 1) % L)][: a * b]
    for c in reversed(cells):
        _step_to(configs, c, -1)
    stages.append(len(configs) - 1)
    return Path(configs, stages)


def reference_path_gamma3(params: ModelParams) -> Path:
    """From the band configuration to a 2x2 square of +1 in a sea of 0.

    The ``L x 2`` strip of -1 spins is filled with 0 spins column by
    column except its last site, which is switched directly to +1 so the
    all-0 configuration is never visited; three more +1 spins then
    complete the square.
    """
    L = params.L
    configs = [band_configuration(L)]
    left, right = L - 2, L - 1
    fill = [(r, left) for r in range(L)] + [(r, right) for r in range(L - 1)]
    _add_line(configs, fill, 0)
    stages = [0, len(configs) - 1]
    last = (L - 1, right)
    _step_to(configs, last, 1)
    stages.append(len(configs) - 1)
    _add_line(configs, [(L - 2, right), (L - 1, left), (L - 2, left)], 1)
    stages.append(len(configs) - 1)
    return Path(configs, stages)


def path_excess(path: Path, h: float) -> float:
    """Maximum energy along the path above its first configuration."""
    e = path.energies()
    return max(x.value(h) for x in e) - e[0].value(h)


# ---------------------------------------------------------------------------
# exponent bookkeeping


def exponent_check_ll1(params: ModelParams) -> dict:
    """Compare ``L^2`` with ``4 (n0 - 1) - [n0 (n0 + 1) - 2] h``.

    The ratio of Gibbs weights of the +1 and 0 configurations is
    ``exp(beta h L^2)``, so the field-weighted form ``h L^2`` is reported
    next to the plain ``L^2`` form; both gaps are per unit beta.
    """
    n0, h, L = params.n0, params.h, params.L
    rhs = 4 * (n0 - 1) - (n0 * (n0 + 1) - 2) * h
    lhs = L * L
    return {
        "lhs": lhs,
        "rhs": rhs,
        "holds": lhs > rhs,
        "log_gap_per_beta": lhs - rhs,
        "field_weighted_lhs": h * lhs,
        "field_weighted_holds": h * lhs > rhs,
        "field_weighted_log_gap_per_beta": h * lhs - rhs,
        "n0h_exceeds_2_minus_h": n0 * h > 2 - h,
    }
