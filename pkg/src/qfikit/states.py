"""Dense complex linear algebra and validated quantum-state types.

Operators are plain ``numpy`` arrays. :class:`DensityOperator` is a thin,
immutable, validating wrapper that converts back to an array through
``__array__``, so every function here accepts either form.

Composite index convention: ``a_index * dB + b_index`` (system a outer),
which is what :func:`numpy.kron` produces.
"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .errors import ArgumentError, ResourceError
from .tolerances import DEFAULT, Tolerances

SeedLike = Union[int, np.random.Generator, None]

__all__ = [
    "AuxiliaryState",
    "DensityOperator",
    "PureState",
    "as_matrix",
    "hermitian_eig",
    "is_hermitian",
    "matrix_from_json",
    "matrix_sqrt_psd",
    "matrix_to_json",
    "partial_trace",
    "random_density",
    "random_hermitian",
    "random_pure_state",
    "random_unitary",
    "tensor_product",
]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_matrix(m, *, square: bool = True) -> np.ndarray:
    """Coerce ``m`` to a finite complex 2-D array."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ArgumentError(f"expected a 2-D matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError("matrix has non-finite entries")
    return arr


def is_hermitian(m, atol: float = DEFAULT.herm) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= atol)


def hermitian_eig(m, tol: Tolerances = DEFAULT):
    """Eigendecomposition of a Hermitian matrix.

    Returns:
        ``(w, V)`` with ``w`` ascending and the columns of ``V`` orthonormal,
        so that ``m == V @ diag(w) @ V^dagger``.

    Raises:
        ArgumentError: if ``m`` is not Hermitian within ``tol.herm``.
    """
    m = as_matrix(m)
    if not is_hermitian(m, tol.herm):
        raise ArgumentError("matrix is not Hermitian")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def _clamped_spectrum(m, tol: Tolerances):
    w, v = hermitian_eig(m, tol)
    if w.size and w[0] < -tol.psd:
        raise ArgumentError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    # eigenvalues at rounding level are zeros; sqrt would blow them up to ~1e-8
    floor = w.size * np.finfo(float).eps * (w[-1] if w.size else 0.0)
    w[w <= floor] = 0.0
    return w, v


def matrix_sqrt_psd(m, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix."""
    w, v = _clamped_spectrum(m, tol)
    return (v * np.sqrt(w)) @ v.conj().T


class DensityOperator:
    """Immutable d x d density matrix.

    Construction checks Hermiticity, unit trace and positivity. Eigenvalues
    in ``[-tol.psd, 0)`` are clamped to zero; anything more negative is
    rejected.
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix, tol: Tolerances = DEFAULT):
        if isinstance(matrix, DensityOperator):
            m = matrix.matrix.copy()
        else:
            m = as_matrix(matrix)
        if m.shape[0] > tol.max_dim:
            raise ResourceError(f"dimension {m.shape[0]} exceeds maximum {tol.max_dim}")
        if not is_hermitian(m, tol.herm):
            raise ArgumentError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > tol.trace:
            raise ArgumentError(f"density matrix trace is {tr!r}, expected 1")
        w, v = np.linalg.eigh(m)
        if w[0] < -tol.psd:
            raise ArgumentError(f"density matrix has negative eigenvalue {w[0]:.3e}")
        if w[0] < 0:
            w = np.clip(w, 0.0, None)
            m = (v * w) @ v.conj().T
        m.setflags(write=False)
        self._matrix = m

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._matrix
        return self._matrix.astype(dtype)

    def __repr__(self):
        return f"DensityOperator(dim={self.dim})"

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._matrix)

    @classmethod
    def from_pure(cls, psi, tol: Tolerances = DEFAULT) -> "DensityOperator":
        psi = PureState(psi, tol).amplitudes
        return cls(np.outer(psi, psi.conj()), tol)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim) / dim)


class PureState:
    """Unit-norm state vector."""

    __slots__ = ("_amplitudes",)

    def __init__(self, amplitudes, tol: Tolerances = DEFAULT):
        psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(psi)):
            raise ArgumentError("state vector has non-finite entries")
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > tol.norm:
            raise ArgumentError(f"state vector norm is {nrm!r}, expected 1")
        psi = psi.copy()
        psi.setflags(write=False)
        self._amplitudes = psi

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    @property
    def dim(self) -> int:
        return self._amplitudes.size

    def density(self) -> DensityOperator:
        return DensityOperator(np.outer(self._amplitudes, self._amplitudes.conj()))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._amplitudes
        return self._amplitudes.astype(dtype)


class AuxiliaryState:
    """Parameter-independent state of the auxiliary system plus its spectrum.

    ``eigen_weights`` are the eigenvalues of ``state`` in descending order;
    they are the ``a_j`` that weight the auxiliary's eigenvectors.
    """

    __slots__ = ("state", "eigen_weights")

    def __init__(self, state, tol: Tolerances = DEFAULT):
        self.state = state if isinstance(state, DensityOperator) else DensityOperator(state, tol)
        w = np.clip(self.state.eigenvalues()[::-1], 0.0, None)
        w.setflags(write=False)
        self.eigen_weights = w

    @property
    def dim(self) -> int:
        return self.state.dim

    @property
    def is_pure(self) -> bool:
        return bool(self.eigen_weights[0] >= 1.0 - DEFAULT.pure)

    def __array__(self, dtype=None, copy=None):
        return self.state.__array__(dtype)

    @classmethod
    def pure(cls, dim: int, index: int = 0) -> "AuxiliaryState":
        m = np.zeros((dim, dim), dtype=complex)
        m[index, index] = 1.0
        return cls(m)

    @classmethod
    def diagonal(cls, weights: Sequence[float]) -> "AuxiliaryState":
        return cls(np.diag(np.asarray(weights, dtype=float)))


def _wrap_like(out: np.ndarray, *inputs):
    if all(isinstance(x, DensityOperator) for x in inputs):
        return DensityOperator(out)
    return out


def tensor_product(a, b, tol: Tolerances = DEFAULT):
    """Kronecker product ``a (x) b`` with system ``a`` as the outer index.

    Returns a :class:`DensityOperator` when both inputs are density operators,
    otherwise a plain array (used for derivatives and projectors).
    """
    A, B = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if A.shape[0] * B.shape[0] > tol.max_dim:
        raise ResourceError(
            f"composite dimension {A.shape[0] * B.shape[0]} exceeds maximum {tol.max_dim}"
        )
    return _wrap_like(np.kron(A, B), a, b)


def partial_trace(rho, dims: tuple[int, int], keep: Union[str, int] = "b"):
    """Trace out one factor of a bipartite operator.

    Args:
        rho: operator on the ``dA * dB`` composite space.
        dims: ``(dA, dB)``.
        keep: ``"a"``/``0`` keeps system a (traces b); ``"b"``/``1`` keeps b.
    """
    m = as_matrix(rho)
    dA, dB = (int(d) for d in dims)
    if dA < 1 or dB < 1 or dA * dB != m.shape[0]:
        raise ArgumentError(f"dims {dims} do not factor a {m.shape[0]}-dim operator")
    r = m.reshape(dA, dB, dA, dB)
    if keep in ("a", 0):
        out = np.einsum("ijkj->ik", r)
    elif keep in ("b", 1):
        out = np.einsum("ijil->jl", r)
    else:
        raise ArgumentError(f"keep must be 'a' or 'b', got {keep!r}")
    return _wrap_like(out, rho)


def random_density(dim: int, rank: int | None = None, seed: SeedLike = None) -> DensityOperator:
    """Ginibre-ensemble density matrix ``G G^dagger / Tr`` of a given rank."""
    rank = dim if rank is None else rank
    if dim < 1 or not 1 <= rank <= dim:
        raise ArgumentError(f"need 1 <= rank <= dim, got rank={rank}, dim={dim}")
    rng = _rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real)


def random_pure_state(dim: int, seed: SeedLike = None) -> np.ndarray:
    rng = _rng(seed)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_unitary(dim: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-random unitary via QR with the diagonal phase fix."""
    rng = _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, seed: SeedLike = None, scale: float = 1.0) -> np.ndarray:
    rng = _rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (g + g.conj().T)


def matrix_to_json(m) -> dict:
    """Serialize a square matrix as ``{"dim", "re", "im"}`` (row-major)."""
    m = as_matrix(m)
    flat = m.reshape(-1)
    return {"dim": int(m.shape[0]), "re": flat.real.tolist(), "im": flat.imag.tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        d = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros(d * d)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArgumentError(f"malformed matrix object: {exc}") from exc
    if d < 1 or re.size != d * d or im.size != d * d:
        raise ArgumentError(f"matrix object needs {d}*{d} entries in 're' and 'im'")
    return as_matrix((re + 1j * im).reshape(d, d))
