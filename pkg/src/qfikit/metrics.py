"""Scalar information metrics: purity, fidelities, QFI, sub-QFI, CFI."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError, NumericPrecisionError, SingularDistributionError
from .families import ParamStateFamily, derivative
from .sld import sld_spectral
from .states import _clamped_spectrum, as_matrix, matrix_sqrt_psd
from .tolerances import DEFAULT, Tolerances

# A finite difference moving the state by fewer ulps than this is noise.
_LIMIT_NOISE_ULPS = 1e3


@dataclass
class MetricReport:
    qfi: float
    sub_qfi: float
    purity: float
    method_tags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(r1, r2):
    a, b = as_matrix(r1), as_matrix(r2)
    if a.shape != b.shape:
        raise ArgumentError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def _tr_prod(a: np.ndarray, b: np.ndarray) -> float:
    """Re Tr(a b) without forming the product."""
    return float(np.real(np.sum(a * b.T)))


def purity(rho) -> float:
    r = as_matrix(rho)
    return _tr_prod(r, r)


def uhlmann_fidelity(r1, r2, tol: Tolerances = DEFAULT) -> float:
    """``Tr sqrt(sqrt(r1) r2 sqrt(r1))``, evaluated as the trace norm of
    ``sqrt(r1) sqrt(r2)``; singular values avoid the square root of
    rounding-level eigenvalues."""
    a, b = _pair(r1, r2)
    sa, sb = matrix_sqrt_psd(a, tol), matrix_sqrt_psd(b, tol)
    return float(np.sum(np.linalg.svd(sa @ sb, compute_uv=False)))


def superfidelity_defect(r1, r2, tol: Tolerances = DEFAULT) -> float:
    """``1 - g(r1, r2)`` without cancellation.

    With ``m_k = 1 - Tr r_k^2`` and ``Tr[(r1 - r2)^2] = Tr r1^2 + Tr r2^2 - 2 Tr(r1 r2)``,

        1 - g = (sqrt(m_1) - sqrt(m_2))^2 / 2 + Tr[(r1 - r2)^2] / 2,

    a sum of two non-negative terms that stays accurate as ``r2 -> r1``.
    Each ``m_k`` is taken from the clamped spectrum as ``(sum l)^2 - sum l^2``,
    so a numerically pure state contributes an exact zero.
    """
    a, b = _pair(r1, r2)
    m1 = max(0.0, eig_pair_product_sum(a, tol=tol))
    m2 = max(0.0, eig_pair_product_sum(b, tol=tol))
    d = a - b
    return 0.5 * (np.sqrt(m1) - np.sqrt(m2)) ** 2 + 0.5 * _tr_prod(d, d)


def superfidelity(r1, r2, tol: Tolerances = DEFAULT) -> float:
    """``g = Tr(r1 r2) + sqrt((1 - Tr r1^2)(1 - Tr r2^2))``, evaluated as
    ``1 - superfidelity_defect(r1, r2)``."""
    return 1.0 - superfidelity_defect(r1, r2, tol)


def eig_pair_product_sum(m, ordered: bool = True, tol: Tolerances = DEFAULT) -> float:
    """Sum of products of distinct eigenvalues.

    With ``ordered=True`` (default) this is ``sum_{i != j} l_i l_j``, i.e.
    ``(sum l)^2 - sum l^2``; ``ordered=False`` counts each unordered pair once
    (half the value).
    """
    w, _ = _clamped_spectrum(m, tol)
    s = float(np.sum(w) ** 2 - np.sum(w**2))
    return s if ordered else 0.5 * s


def qfi_pure(psi, dpsi) -> float:
    """``4 (<dpsi|dpsi> - |<psi|dpsi>|^2)`` for a normalized ket."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    dpsi = np.asarray(dpsi, dtype=complex).reshape(-1)
    return float(4 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2))


def qfi(rho, drho, tol: Tolerances = DEFAULT) -> float:
    """SLD quantum Fisher information ``Tr(rho L^2)``."""
    return sld_spectral(rho, drho, tol).qfi


def sub_qfi(rho, drho, tol: Tolerances = DEFAULT) -> float:
    """Sub-QFI from the state and its derivative.

    ``2 Tr[(d rho)^2] + (d Tr rho^2)^2 / (2 (1 - Tr rho^2))`` for mixed states;
    when ``1 - Tr rho^2 < tol.pure`` only the first term is kept.
    """
    r, d = _pair(rho, drho)
    first = 2 * _tr_prod(d, d)
    mixedness = 1.0 - purity(r)
    if mixedness < tol.pure:
        return first
    dpur = 2 * _tr_prod(r, d)
    return first + 0.5 * dpur**2 / mixedness


def sub_qfi_unitary(rho0, h, tol: Tolerances = DEFAULT) -> float:
    """Sub-QFI for ``exp(-ixH) rho0 exp(ixH)``: ``4 [Tr(rho^2 H^2) - Tr(rho H rho H)]``."""
    r, hm = _pair(rho0, h)
    rh = r @ hm
    return 4 * (_tr_prod(r @ r, hm @ hm) - _tr_prod(rh, rh))


def qfi_spectral(family: ParamStateFamily, x: float, tol: Tolerances = DEFAULT) -> float:
    return qfi(family(x), derivative(family, x), tol)


def sub_qfi_general(family: ParamStateFamily, x: float, tol: Tolerances = DEFAULT) -> float:
    return sub_qfi(family(x), derivative(family, x), tol)


def _richardson(h: np.ndarray, values: np.ndarray) -> float:
    """Neville extrapolation of the interpolating polynomial in ``h`` to 0."""
    t = values.astype(float).copy()
    n = t.size
    for m in range(1, n):
        for i in range(n - m):
            t[i] = (h[i + m] * t[i] - h[i] * t[i + 1]) / (h[i + m] - h[i])
    return float(t[0])


def sub_qfi_limit(family: ParamStateFamily, x: float, dx_sequence: Sequence[float],
                  tol: Tolerances = DEFAULT):
    """Finite-difference sub-QFI from superfidelity.

    Each estimate is ``8 (1 - sqrt(g(rho(x), rho(x + dx)))) / dx^2`` with
    ``1 - sqrt(g) = (1 - g) / (1 + sqrt(g))`` and ``1 - g`` from
    :func:`superfidelity_defect`, and ``dx`` the step actually realized in
    floating point. The estimates carry odd as well as even powers of ``dx``
    (the pair is not symmetric about ``x``), so the extrapolation eliminates
    all powers up to ``len(dx_sequence) - 1``.

    Returns:
        ``(estimates, extrapolated)``.

    Raises:
        NumericPrecisionError: a ``dx`` vanishes against ``x``, or moves the
            state by no more than rounding noise.
    """
    dxs = np.asarray(dx_sequence, dtype=float)
    if dxs.ndim != 1 or dxs.size == 0 or np.any(dxs <= 0):
        raise ArgumentError("dx_sequence must be a non-empty list of positive numbers")
    if np.any(np.diff(dxs) >= 0):
        raise ArgumentError("dx_sequence must be strictly decreasing")
    x = float(x)
    rho = as_matrix(family(x))
    noise = _LIMIT_NOISE_ULPS * np.finfo(float).eps * rho.shape[0]
    steps, estimates = [], []
    for dx in dxs:
        h = (x + dx) - x
        if h == 0.0:
            raise NumericPrecisionError(f"dx={dx:g} vanishes against x={x:g}")
        other = as_matrix(family(x + h))
        moved = float(np.max(np.abs(other - rho)))
        if 0.0 < moved < noise:
            raise NumericPrecisionError(
                f"dx={dx:g}: state changes by {moved:.1e}, below rounding resolution"
            )
        defect = superfidelity_defect(rho, other, tol)
        steps.append(h)
        estimates.append(8 * defect / (1 + np.sqrt(1 - defect)) / h**2)
    est = np.array(estimates)
    return est.tolist(), _richardson(np.array(steps), est)


def classical_fisher(probs, dprobs, tol: Tolerances = DEFAULT, dp_floor: float = 0.0) -> float:
    """``sum_i (dp_i)^2 / p_i``.

    Outcomes with ``p_i <= tol.prob`` and ``|dp_i| <= max(tol.prob, dp_floor)``
    contribute nothing. ``dp_floor`` is the resolution of ``dprobs`` when they
    come from an inexact derivative (see :func:`derivative_resolution`).

    Raises:
        SingularDistributionError: ``p_i`` vanishes while ``dp_i`` does not.
        ArgumentError: inputs are not a normalized distribution / derivative.
    """
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    if p.shape != dp.shape or p.ndim != 1:
        raise ArgumentError("probs and dprobs must be 1-D arrays of equal length")
    if np.any(p < -tol.prob):
        raise ArgumentError("probabilities must be non-negative")
    if abs(p.sum() - 1) > tol.trace:
        raise ArgumentError(f"probabilities sum to {p.sum()!r}")
    if abs(dp.sum()) > tol.trace:
        raise ArgumentError(f"probability derivatives sum to {dp.sum()!r}")
    zero = p <= tol.prob
    moving = np.abs(dp) > max(tol.prob, float(dp_floor))
    if np.any(zero & moving):
        i = int(np.argmax(zero & moving))
        raise SingularDistributionError(
            f"outcome {i} has p={p[i]:.3e} but dp={dp[i]:.3e}"
        )
    keep = ~zero
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def metric_report(family: ParamStateFamily, x: float, tol: Tolerances = DEFAULT) -> MetricReport:
    rho, drho = family(x), derivative(family, x)
    pur = purity(rho)
    tags = ["qfi:sld-spectral",
            "sub_qfi:pure-branch" if 1 - pur < tol.pure else "sub_qfi:mixed-closed-form",
            f"derivative:{family.strategy}"]
    return MetricReport(qfi(rho, drho, tol), sub_qfi(rho, drho, tol), pur, tags)
