"""Single-qubit auxiliary optimization and lossless projector grouping."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, SingularDistributionError
from .families import ParamStateFamily, derivative, derivative_resolution
from .measurement import ProjectiveMeasurement
from .metrics import classical_fisher
from .tolerances import DEFAULT, Tolerances

_PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def overlap_chi(theta1, phi1, theta2, phi2):
    """``cos`` of the angle between two Bloch directions, minus one."""
    return (np.sin(theta1) * np.sin(theta2) * np.cos(phi1 - phi2)
            + np.cos(theta1) * np.cos(theta2) - 1)


@dataclass(frozen=True)
class BlochConfig:
    """Two auxiliary qubit states with common Bloch radius ``r``."""

    r: float
    theta1: float = 0.0
    phi1: float = 0.0
    theta2: float = 0.0
    phi2: float = 0.0
    chi: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ArgumentError(f"Bloch radius must lie in [0, 1], got {self.r}")
        chi = float(np.clip(overlap_chi(self.theta1, self.phi1, self.theta2, self.phi2), -2, 0))
        object.__setattr__(self, "chi", chi)

    @classmethod
    def from_chi(cls, r: float, chi: float) -> "BlochConfig":
        """First vector on the +z pole, second tilted in the xz-plane."""
        if not -2.0 <= chi <= 0.0:
            raise ArgumentError(f"chi must lie in [-2, 0], got {chi}")
        return cls(r, 0.0, 0.0, float(np.arccos(1.0 + chi)), 0.0)

    def bloch_vectors(self):
        def vec(t, p):
            return self.r * np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
        return vec(self.theta1, self.phi1), vec(self.theta2, self.phi2)

    def states(self):
        """``(rho_1, rho_2) = (I + r_k . sigma) / 2``."""
        return tuple(0.5 * (np.eye(2) + np.einsum("k,kab->ab", v, _PAULI))
                     for v in self.bloch_vectors())


def single_qubit_qfi(p1: float, dp1: float, cfg: BlochConfig, tol: Tolerances = DEFAULT) -> float:
    """QFI of ``p1 rho_1 + (1 - p1) rho_2`` for the configuration ``cfg``.

    ``[-2 r^2 (1 - r^2) chi + r^4 chi^2] p1'^2 / (1 - r^2 - 2 r^2 p1 p2 chi)``.
    At ``chi == 0`` the numerator vanishes identically and 0 is returned,
    including the otherwise 0/0 point ``r = 1``.
    """
    if not 0.0 < p1 < 1.0:
        raise ArgumentError(f"p1 must lie in (0, 1), got {p1}")
    r2, chi = cfg.r**2, cfg.chi
    if chi == 0.0:
        return 0.0
    p2 = 1.0 - p1
    den = 1.0 - r2 - 2.0 * r2 * p1 * p2 * chi
    if den <= tol.prob:
        raise SingularDistributionError(f"denominator {den:.3e} vanishes (r={cfg.r}, chi={chi})")
    return float((-2.0 * r2 * (1.0 - r2) * chi + r2 * r2 * chi * chi) * dp1**2 / den)


def chi_extrema(p1: float, r: float, tol: Tolerances = DEFAULT):
    """Stationary points ``chi_+-`` of the single-qubit QFI in ``chi``."""
    if not 0.0 < r <= 1.0:
        raise ArgumentError(f"r must lie in (0, 1], got {r}")
    q = p1 * (1.0 - p1)
    if q <= tol.prob:
        raise SingularDistributionError(f"p1 p2 = {q:.3e} vanishes")
    root = np.sqrt(max(0.0, 1.0 - 4.0 * q))
    scale = (1.0 - r * r) / (2.0 * r * r * q)
    return float(scale * (1.0 + root)), float(scale * (1.0 - root))


def scan_single_qubit(p1: float, dp1: float, grid: tuple = (200, 200), eps_r: float = 1e-6):
    """Evaluate the single-qubit QFI on ``chi in [-2, 0]`` x ``r in [0, 1 - eps_r]``.

    Returns:
        ``(chis, rs, F)`` with ``F[i, j]`` at ``(chis[i], rs[j])``.
    """
    n_chi, n_r = grid
    if n_chi < 2 or n_r < 2:
        raise ArgumentError("grid sizes must be >= 2")
    if not 0.0 < p1 < 1.0:
        raise ArgumentError(f"p1 must lie in (0, 1), got {p1}")
    chis = np.linspace(-2.0, 0.0, n_chi)
    rs = np.linspace(0.0, 1.0 - eps_r, n_r)
    c, r2 = chis[:, None], rs[None, :] ** 2
    p2 = 1.0 - p1
    f = (-2.0 * r2 * (1.0 - r2) * c + r2 * r2 * c * c) * dp1**2 / (1.0 - r2 - 2.0 * r2 * p1 * p2 * c)
    f[chis == 0.0, :] = 0.0
    return chis, rs, f


def optimize_single_qubit(p1: float, dp1: float, grid: tuple = (200, 200), eps_r: float = 1e-6):
    """Best single-qubit auxiliary for the outcome pair ``(p1, 1 - p1)``.

    The interior grid scan stops short of ``r = 1``; the boundary optimum
    ``chi = -2, r = 1`` is added through its closed form ``p1'^2 / (p1 p2)``
    and wins ties.

    Returns:
        ``(best_cfg, F_max)``.
    """
    chis, rs, f = scan_single_qubit(p1, dp1, grid, eps_r)
    boundary = dp1**2 / (p1 * (1.0 - p1))
    i, j = np.unravel_index(int(np.argmax(f)), f.shape)
    if f[i, j] > boundary:
        return BlochConfig.from_chi(float(rs[j]), float(chis[i])), float(f[i, j])
    return BlochConfig.from_chi(1.0, -2.0), float(boundary)


# ----------------------------------------------------------------------------
# projector grouping

def grouping_condition(probs, dprobs) -> float:
    """``max_{j,k} |p_j p'_k - p_k p'_j|`` over one group."""
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    if p.size == 0:
        raise ArgumentError("group must be non-empty")
    cross = p[:, None] * dp[None, :] - dp[:, None] * p[None, :]
    return float(np.max(np.abs(cross)))


def _check_partition(groups, n: int):
    flat = sorted(i for g in groups for i in g)
    if flat != list(range(n)):
        raise ArgumentError(f"groups {groups} do not partition range({n})")


def grouped_distribution(probs, dprobs, groups):
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    _check_partition(groups, p.size)
    return (np.array([p[list(g)].sum() for g in groups]),
            np.array([dp[list(g)].sum() for g in groups]))


def cfi_group_difference(probs, dprobs, groups, tol: Tolerances = DEFAULT) -> float:
    """Loss of classical Fisher information from summing outcomes in ``groups``::

        sum_groups sum_{j<l} (p_l p'_j - p_j p'_l)^2 / (p_j p_l sum_k p_k)
    """
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    _check_partition(groups, p.size)
    total = 0.0
    for g in groups:
        g = list(g)
        psum = p[g].sum()
        for j, l in combinations(g, 2):
            num = (p[l] * dp[j] - p[j] * dp[l]) ** 2
            den = p[j] * p[l] * psum
            if min(p[j], p[l]) <= tol.prob:
                zero = j if p[j] <= tol.prob else l
                if abs(dp[zero]) > tol.prob:
                    raise SingularDistributionError(
                        f"outcome {zero} has zero probability but nonzero derivative"
                    )
                continue
            total += num / den
    return float(total)


@dataclass
class GroupingPlan:
    groups: list
    residuals: list
    cfi_before: float
    cfi_after: float
    measurement: Optional[ProjectiveMeasurement] = field(default=None, repr=False)

    @property
    def n_original(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def n_reduced(self) -> int:
        return len(self.groups)

    def as_dict(self) -> dict:
        return {
            "N": self.n_original,
            "M": self.n_reduced,
            "groups": [list(map(int, g)) for g in self.groups],
            "residuals": list(self.residuals),
            "I1": self.cfi_before,
            "I2": self.cfi_after,
            "I1_minus_I2": self.cfi_before - self.cfi_after,
        }


def default_grouping_tol(probs, dprobs) -> float:
    p = np.abs(np.asarray(probs, dtype=float))
    dp = np.abs(np.asarray(dprobs, dtype=float))
    return 1e-9 * max(float(np.max(np.outer(p, dp))), np.finfo(float).tiny)


def plan_grouping(probs, dprobs, tol: Optional[float] = None,
                  tolerances: Tolerances = DEFAULT, dp_floor: float = 0.0) -> GroupingPlan:
    """Greedy agglomerative grouping of outcomes.

    Repeatedly merge the pair of current groups whose union satisfies
    :func:`grouping_condition` within ``tol``, preferring the largest union
    and then the lowest indices. Stops when no pair qualifies. ``dp_floor``
    is forwarded to :func:`classical_fisher`.
    """
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    tol = default_grouping_tol(p, dp) if tol is None else float(tol)
    groups = [[i] for i in range(p.size)]
    while True:
        best = None
        for a, b in combinations(range(len(groups)), 2):
            union = sorted(groups[a] + groups[b])
            if grouping_condition(p[union], dp[union]) <= tol:
                key = (-len(union), groups[a][0], groups[b][0])
                if best is None or key < best[0]:
                    best = (key, a, b)
        if best is None:
            break
        _, a, b = best
        groups[a] = sorted(groups[a] + groups[b])
        del groups[b]
        groups.sort(key=lambda g: g[0])
    residuals = [grouping_condition(p[g], dp[g]) for g in groups]
    gp, gdp = grouped_distribution(p, dp, groups)
    return GroupingPlan(groups, residuals, classical_fisher(p, dp, tolerances, dp_floor),
                        classical_fisher(gp, gdp, tolerances, dp_floor))


def reduce_projectors(meas: ProjectiveMeasurement, family_a: ParamStateFamily, x: float,
                      tol: Optional[float] = None,
                      tolerances: Tolerances = DEFAULT) -> GroupingPlan:
    """Group the projectors of ``meas`` for the state ``family_a(x)`` and
    attach the merged measurement ``{Pi'_g = sum_{j in g} Pi_j}``."""
    p = meas.probabilities(family_a(x))
    dp = meas.probabilities(derivative(family_a, x))
    plan = plan_grouping(p, dp, tol, tolerances, derivative_resolution(family_a))
    plan.measurement = meas.merged(plan.groups)
    return plan
