"""Information transfer from a system to an auxiliary via a controlled unitary.

The pipeline: form ``rho_a(x) (x) sigma_b``, apply ``U = sum_i Pi_i (x) O_i``,
trace out system a, and compare the QFI at each stage.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError, NumericPrecisionError, SingularDistributionError
from .families import ParamStateFamily, derivative, derivative_resolution
from .measurement import ProjectiveMeasurement
from .metrics import classical_fisher, qfi, sub_qfi
from .states import DensityOperator, as_matrix
from .tolerances import DEFAULT, Tolerances

log = logging.getLogger(__name__)

__all__ = [
    "ControlledUnitary",
    "ProjectiveMeasurement",
    "ProtocolReport",
    "apply_protocol",
    "audit_chain",
    "bell_controlled_unitary",
    "bell_measurement",
    "build_controlled_unitary",
    "mixed_aux_ceiling",
    "mixed_aux_ceiling_terms",
    "orthogonal_aux_unitaries",
]


@dataclass(frozen=True)
class ControlledUnitary:
    projectors: np.ndarray   # (N, dA, dA)
    aux_ops: np.ndarray      # (N, dB, dB)
    matrix: np.ndarray       # (dA*dB, dA*dB)
    propagating: bool = True

    @property
    def dim_a(self) -> int:
        return self.projectors.shape[1]

    @property
    def dim_b(self) -> int:
        return self.aux_ops.shape[1]

    @property
    def count(self) -> int:
        return self.projectors.shape[0]


def build_controlled_unitary(meas: ProjectiveMeasurement, aux_ops: Sequence,
                             tol: Tolerances = DEFAULT) -> ControlledUnitary:
    """Assemble ``U = sum_i Pi_i (x) O_i``.

    Identical ``O_i`` for every outcome is allowed but logged as a warning:
    such a ``U`` is ``I (x) O`` and transfers no information.
    """
    ops = [as_matrix(o) for o in aux_ops]
    if len(ops) != meas.count:
        raise ArgumentError(f"{len(ops)} auxiliary operators for {meas.count} projectors")
    db = ops[0].shape[0]
    for i, o in enumerate(ops):
        if o.shape != (db, db):
            raise ArgumentError("auxiliary operators must share one dimension")
        if np.max(np.abs(o.conj().T @ o - np.eye(db))) > tol.proj:
            raise ArgumentError(f"auxiliary operator {i} is not unitary")
    u = sum(np.kron(p, o) for p, o in zip(meas.projectors, ops))
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > tol.proj:
        raise ArgumentError("assembled controlled unitary is not unitary")
    propagating = any(np.max(np.abs(o - ops[0])) > tol.proj for o in ops[1:])
    if not propagating:
        msg = "all auxiliary operators are identical; no information reaches the auxiliary"
        log.warning(msg)
        warnings.warn(msg, stacklevel=2)
    aux = np.array(ops)
    for arr in (aux, u):
        arr.setflags(write=False)
    return ControlledUnitary(meas.projectors, aux, u, propagating)


def orthogonal_aux_unitaries(count: int, dim: int) -> list:
    """Cyclic shifts ``X^i`` on ``dim`` levels, ``i = 0 .. count-1``.

    Applied to ``|0><0|`` they give mutually orthogonal pure states as long
    as ``count <= dim``; beyond that the shifts repeat.
    """
    shift = np.roll(np.eye(dim, dtype=complex), 1, axis=0)
    return [np.linalg.matrix_power(shift, i % dim) for i in range(count)]


def _transfer(m: np.ndarray, sigma: np.ndarray, cu: ControlledUnitary) -> np.ndarray:
    # linear in m, so it maps both rho_a and d rho_a
    weights = np.einsum("iab,ba->i", cu.projectors, m).real
    rotated = np.einsum("iab,bc,idc->iad", cu.aux_ops, sigma, cu.aux_ops.conj())
    return np.einsum("i,iab->ab", weights, rotated)


def apply_protocol(rho_a, sigma_b, cu: ControlledUnitary, method: str = "closed",
                   tol: Tolerances = DEFAULT):
    """``Tr_a[U (rho_a (x) sigma_b) U^dagger]``.

    ``method="closed"`` uses ``sum_i Tr(Pi_i rho_a) O_i sigma O_i^dagger``;
    ``method="dense"`` forms the composite operator and traces it.
    """
    ra = as_matrix(rho_a)
    sb = as_matrix(np.asarray(sigma_b))
    if ra.shape[0] != cu.dim_a or sb.shape[0] != cu.dim_b:
        raise ArgumentError(
            f"state dims ({ra.shape[0]}, {sb.shape[0]}) do not match unitary "
            f"({cu.dim_a}, {cu.dim_b})"
        )
    if method == "closed":
        out = _transfer(ra, sb, cu)
    elif method == "dense":
        u = cu.matrix
        comp = u @ np.kron(ra, sb) @ u.conj().T
        out = np.einsum("ijil->jl", comp.reshape(cu.dim_a, cu.dim_b, cu.dim_a, cu.dim_b))
    else:
        raise ArgumentError(f"unknown method {method!r}")
    if isinstance(rho_a, DensityOperator):
        return DensityOperator(out, tol)
    return out


@dataclass
class ProtocolReport:
    x: float
    probs: list
    dprobs: list
    F_a: float
    F_b: float
    F_sub_b: float
    cfi_a: float
    chain_ok: bool
    F_composite: float = float("nan")
    F_rotated: float = float("nan")
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def audit_chain(family_a: ParamStateFamily, sigma_b, cu: ControlledUnitary, x: float,
                tol: Tolerances = DEFAULT) -> ProtocolReport:
    """Evaluate every stage of the transfer at ``x`` and check

        F(rho_a) = F(U rho_ab U^dagger) >= F(rho_b) >= F_sub(rho_b),

    plus ``F(rho_a (x) sigma) = F(rho_a)`` and ``F(rho_b) <= CFI(rho_a, {Pi_i})``.
    ``chain_ok`` reflects the two inequalities only; every breach (including
    the equalities) is listed in ``violations`` with its magnitude.
    """
    sigma = as_matrix(np.asarray(sigma_b))
    rho_a, drho_a = family_a(x), derivative(family_a, x)
    if rho_a.shape[0] != cu.dim_a or sigma.shape[0] != cu.dim_b:
        raise ArgumentError("family / auxiliary dimensions do not match the unitary")

    f_a = qfi(rho_a, drho_a, tol)
    rho_ab, drho_ab = np.kron(rho_a, sigma), np.kron(drho_a, sigma)
    f_ab = qfi(rho_ab, drho_ab, tol)
    u = cu.matrix
    f_rot = qfi(u @ rho_ab @ u.conj().T, u @ drho_ab @ u.conj().T, tol)

    rho_b, drho_b = _transfer(rho_a, sigma, cu), _transfer(drho_a, sigma, cu)
    f_b = qfi(rho_b, drho_b, tol)
    f_sub = sub_qfi(rho_b, drho_b, tol)

    p = np.einsum("iab,ba->i", cu.projectors, rho_a).real
    dp = np.einsum("iab,ba->i", cu.projectors, drho_a).real
    cfi_a = classical_fisher(p, dp, tol, derivative_resolution(family_a))

    eps = tol.chain
    checks = {
        "chain:F_a>=F_b": f_b - f_a,
        "chain:F_b>=F_sub_b": f_sub - f_b,
        "ceiling:F_b<=cfi_a": f_b - cfi_a,
        "additivity:F_composite==F_a": abs(f_ab - f_a),
        "invariance:F_rotated==F_composite": abs(f_rot - f_ab),
    }
    violations = [{"check": k, "magnitude": float(v)} for k, v in checks.items() if v > eps]
    chain_ok = checks["chain:F_a>=F_b"] <= eps and checks["chain:F_b>=F_sub_b"] <= eps
    return ProtocolReport(float(x), p.tolist(), dp.tolist(), f_a, f_b, f_sub, cfi_a,
                          bool(chain_ok), f_ab, f_rot, violations)


def mixed_aux_ceiling_terms(probs, dprobs, weights, tol: Tolerances = DEFAULT):
    """Both sides of the mixed-auxiliary ceiling.

    Returns:
        ``(sum_ij (p'_i a_ij)^2 / (p_i a_ij), sum_i p'_i^2 / p_i)``.
    """
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    a = np.atleast_2d(np.asarray(weights, dtype=float))
    if a.shape[0] != p.size:
        raise ArgumentError(f"weights need {p.size} rows, got {a.shape[0]}")
    if np.any(a < -tol.trace) or np.any(np.abs(a.sum(axis=1) - 1) > tol.trace):
        raise ArgumentError("weight rows must be non-negative and sum to 1")
    joint = p[:, None] * a
    djoint = dp[:, None] * a
    zero = joint <= tol.prob
    if np.any(zero & (np.abs(djoint) > tol.prob)):
        raise SingularDistributionError("a vanishing p_i a_ij has a nonzero derivative")
    lhs = float(np.sum(djoint[~zero] ** 2 / joint[~zero]))
    rhs = classical_fisher(p, dp, tol)
    return lhs, rhs


def mixed_aux_ceiling(probs, dprobs, weights, tol: Tolerances = DEFAULT) -> float:
    """Maximal auxiliary QFI when each ``O_i sigma O_i^dagger`` is the mixture
    ``sum_j a_ij |psi_ij><psi_ij|`` of mutually orthogonal kets."""
    lhs, rhs = mixed_aux_ceiling_terms(probs, dprobs, weights, tol)
    if abs(lhs - rhs) > tol.metric * max(1.0, abs(rhs)):
        raise NumericPrecisionError(f"ceiling sides disagree: {lhs!r} vs {rhs!r}")
    return lhs


# ----------------------------------------------------------------------------
# the two-qubit Bell example

def bell_measurement() -> ProjectiveMeasurement:
    """Projectors onto ``(|00> +- |11>)/sqrt(2)``, completed by ``|01>`` and ``|10>``."""
    s = 1 / np.sqrt(2)
    basis = np.array([
        [s, s, 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
        [s, -s, 0, 0],
    ], dtype=complex)
    return ProjectiveMeasurement.from_basis(basis)


def bell_controlled_unitary() -> ControlledUnitary:
    """``I`` on the ``+`` outcome, ``X`` on ``-``; identity on the completion."""
    eye = np.eye(2, dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    return build_controlled_unitary(bell_measurement(), [eye, x, eye, eye])
