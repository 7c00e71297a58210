"""Symmetric logarithmic derivative (SLD) solvers.

Two independent routes to the QFI live here:

* :func:`sld_spectral` solves ``2 d rho = L rho + rho L`` in the eigenbasis
  of ``rho``;
* :class:`GramSystem` solves the same equation in a non-orthogonal basis of
  ensemble states, ``2D = RSL + LSR``, and :func:`gram_qfi` /
  :func:`theorem1_qfi` evaluate the QFI from that solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, RankChangeError, SingularDistributionError, StateError
from .measurement import ProjectiveMeasurement
from .states import as_matrix, hermitian_eig, is_hermitian
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class SldResult:
    sld: np.ndarray
    qfi: float
    skipped_pairs: tuple = ()


def _check_derivative(drho: np.ndarray, dim: int, tol: Tolerances) -> np.ndarray:
    d = as_matrix(drho)
    if d.shape[0] != dim:
        raise ArgumentError(f"derivative dim {d.shape[0]} != state dim {dim}")
    if not is_hermitian(d, tol.herm):
        raise ArgumentError("derivative is not Hermitian")
    if abs(np.trace(d)) > tol.trace:
        raise ArgumentError(f"derivative is not traceless (trace {np.trace(d):.3e})")
    return 0.5 * (d + d.conj().T)


def sld_spectral(rho, drho, tol: Tolerances = DEFAULT) -> SldResult:
    """Spectral SLD of ``rho`` for the derivative ``drho``.

    Pairs of eigenvectors with ``lambda_j + lambda_k <= tol.kernel`` are
    dropped (their indices are reported in ``skipped_pairs``, ``j <= k``).

    Raises:
        RankChangeError: if ``drho`` has an element larger than ``tol.sld``
            on a dropped pair, i.e. the rank of ``rho`` changes at this point.
    """
    w, v = hermitian_eig(rho, tol)
    d = _check_derivative(drho, w.size, tol)
    d_eig = v.conj().T @ d @ v
    denom = w[:, None] + w[None, :]
    keep = denom > tol.kernel
    bad = (~keep) & (np.abs(d_eig) > tol.sld)
    if np.any(bad):
        j, k = np.argwhere(bad)[0]
        raise RankChangeError(
            f"derivative element {abs(d_eig[j, k]):.3e} on eigenpair ({j}, {k}) outside "
            "the support of rho; the QFI is discontinuous here"
        )
    l_eig = np.zeros_like(d_eig)
    l_eig[keep] = 2 * d_eig[keep] / denom[keep]
    # Tr(rho L^2) in the eigenbasis of rho: sum_jk lambda_j |L_jk|^2
    qfi = float(np.sum(np.clip(w, 0.0, None)[:, None] * np.abs(l_eig) ** 2))
    skipped = tuple((int(j), int(k)) for j, k in np.argwhere(~keep) if j <= k)
    sld = v @ l_eig @ v.conj().T
    return SldResult(0.5 * (sld + sld.conj().T), qfi, skipped)


def sld_residual(rho, drho, sld) -> float:
    """``max |2 d rho - (L rho + rho L)|`` entrywise."""
    rho, drho, sld = (np.asarray(m, dtype=complex) for m in (rho, drho, sld))
    return float(np.max(np.abs(2 * drho - (sld @ rho + rho @ sld))))


def optimal_measurement(rho, drho, tol: Tolerances = DEFAULT) -> ProjectiveMeasurement:
    """Projectors onto the eigenspaces of the SLD.

    Eigenvalues closer than ``tol.degen`` are merged into one eigenspace.
    """
    res = sld_spectral(rho, drho, tol)
    w, v = np.linalg.eigh(res.sld)
    clusters, start = [], 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i] - w[i - 1] > tol.degen:
            clusters.append(list(range(start, i)))
            start = i
    return ProjectiveMeasurement.from_basis(v, clusters, tol)


# ----------------------------------------------------------------------------
# Gram-matrix (non-orthogonal basis) method

def _vectorized_sylvester(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Solve ``a X + X b = c`` (row-major vectorization)."""
    n = a.shape[0]
    eye = np.eye(n)
    k = np.kron(a, eye) + np.kron(eye, b.T)
    rhs = c.reshape(-1)
    try:
        x = np.linalg.solve(k, rhs)
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(k, rhs, rcond=None)[0]
    return x.reshape(n, n)


@dataclass(frozen=True)
class GramSystem:
    """State and derivative expanded in a linearly independent basis.

    ``rho = sum_ij R_ij |psi_i><psi_j|``, ``d rho = sum_ij D_ij |psi_i><psi_j|``,
    ``S_ij = <psi_i|psi_j>``. After :meth:`solve`, ``L`` holds the SLD in the
    same basis and ``M = S L``.
    """

    basis: np.ndarray                  # columns are the basis kets
    S: np.ndarray
    R: np.ndarray
    D: np.ndarray
    L: Optional[np.ndarray] = field(default=None)

    @property
    def size(self) -> int:
        return self.S.shape[0]

    @property
    def M(self) -> np.ndarray:
        if self.L is None:
            raise StateError("GramSystem has not been solved")
        return self.S @ self.L

    @classmethod
    def from_coefficients(cls, basis, R, D, tol: Tolerances = DEFAULT) -> "GramSystem":
        psi = np.asarray(basis, dtype=complex)
        if psi.ndim != 2:
            raise ArgumentError("basis must be a 2-D array of column kets")
        S = psi.conj().T @ psi
        R, D = as_matrix(R), as_matrix(D)
        n = S.shape[0]
        if R.shape != (n, n) or D.shape != (n, n):
            raise ArgumentError("R and D must be N x N for an N-element basis")
        smin = np.linalg.eigvalsh(0.5 * (S + S.conj().T))[0]
        if smin <= tol.gram:
            raise ArgumentError(
                f"basis is not linearly independent (min Gram eigenvalue {smin:.3e})"
            )
        return cls(psi, S, R, D)

    @classmethod
    def from_ensemble(cls, states: Sequence, probs, dprobs,
                      tol: Tolerances = DEFAULT) -> "GramSystem":
        """System for ``rho = sum_i p_i |psi_i><psi_i|`` in the rescaled basis
        ``|phi_i> = sqrt(p_i) |psi_i>``, where ``R = I`` and ``D = diag(p'_i / p_i)``."""
        p = np.asarray(probs, dtype=float)
        dp = np.asarray(dprobs, dtype=float)
        if np.any(p <= tol.prob):
            raise SingularDistributionError("ensemble weights must be strictly positive")
        psi = np.array([np.asarray(s, dtype=complex).reshape(-1) for s in states]).T
        if psi.shape[1] != p.size or dp.size != p.size:
            raise ArgumentError("states, probs and dprobs must have equal length")
        phi = psi * np.sqrt(p)
        n = p.size
        return cls.from_coefficients(phi, np.eye(n), np.diag(dp / p), tol)

    def solve(self) -> "GramSystem":
        """Return a copy with ``L`` solving ``2D = RSL + LSR``."""
        L = _vectorized_sylvester(self.R @ self.S, self.S @ self.R, 2 * self.D)
        return replace(self, L=L)

    def residual(self) -> float:
        if self.L is None:
            raise StateError("GramSystem has not been solved")
        R, S, L = self.R, self.S, self.L
        return float(np.max(np.abs(2 * self.D - (R @ S @ L + L @ S @ R))))

    def density(self) -> np.ndarray:
        return self.basis @ self.R @ self.basis.conj().T

    def derivative(self) -> np.ndarray:
        return self.basis @ self.D @ self.basis.conj().T

    def sld_operator(self) -> np.ndarray:
        """The SLD as an operator in the ambient (computational) basis."""
        if self.L is None:
            raise StateError("GramSystem has not been solved")
        return self.basis @ self.L @ self.basis.conj().T


def gram_qfi(system: GramSystem) -> float:
    """``Re Tr(S L S L S R)``."""
    if system.L is None:
        raise StateError("GramSystem has not been solved")
    S, L, R = system.S, system.L, system.R
    return float(np.real(np.trace(S @ L @ S @ L @ S @ R)))


def theorem1_qfi(probs, dprobs, S, L, tol: Tolerances = DEFAULT) -> float:
    """QFI of ``sum_i p_i |psi_i><psi_i|`` as the classical Fisher information
    of ``p`` minus the overlap correction

        1/2 sum_ij S_ij (p'_i/p_i - p'_j/p_j) (S L)_ji

    with ``S`` and ``L`` taken from the rescaled-basis :class:`GramSystem`.
    """
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    if np.any(p <= tol.prob):
        raise SingularDistributionError("probabilities must be strictly positive")
    S, L = as_matrix(S), as_matrix(L)
    ratio = dp / p
    diff = ratio[:, None] - ratio[None, :]
    correction = 0.5 * np.real(np.sum(S * diff * (S @ L).T))
    return float(np.sum(dp**2 / p) - correction)
