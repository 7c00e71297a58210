"""Numerical tolerances used across the package.

All thresholds live in one frozen dataclass so that a scenario file or a
caller can override any subset without touching module globals.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10      # max |m - m^dagger| entry
    trace: float = 1e-10     # |Tr rho - 1|, probability normalization
    psd: float = 1e-10       # most negative eigenvalue accepted (then clamped)
    eig: float = 1e-9        # eigendecomposition / sqrt reconstruction
    norm: float = 1e-10      # state-vector norm
    metric: float = 1e-8     # slack on metric inequalities
    prob: float = 1e-12      # probabilities at or below are treated as zero
    pure: float = 1e-9       # 1 - purity below this selects the pure branch
    kernel: float = 1e-10    # SLD cutoff on lambda_j + lambda_k
    sld: float = 1e-8        # SLD residual / rank-change detection
    degen: float = 1e-8      # SLD eigenvalue merge threshold
    gram: float = 1e-10      # min Gram eigenvalue for linear independence
    proj: float = 1e-10      # projector / unitary checks
    proto: float = 1e-10     # dense vs closed-form protocol agreement
    chain: float = 1e-7      # inequality chain slack
    cross: float = 1e-7      # agreement between independent QFI solvers
    max_dim: int = 4096      # largest dense dimension accepted

    def with_overrides(self, **overrides) -> "Tolerances":
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = Tolerances()
