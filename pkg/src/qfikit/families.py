"""Parametrized state families and their derivative oracles."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArgumentError, ConfigurationError
from .states import (
    SeedLike,
    _rng,
    as_matrix,
    hermitian_eig,
    is_hermitian,
)
from .tolerances import DEFAULT, Tolerances

STRATEGIES = ("analytic", "analytic-commutator", "central-difference", "parameter-shift")

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class HermitianGenerator:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if not is_hermitian(m):
            raise ArgumentError(f"generator {self.label!r} is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def _shift_gap(h: np.ndarray, tol: Tolerances) -> float:
    """Common nonzero eigenvalue gap of ``h``; raises unless there is exactly one."""
    w = np.linalg.eigvalsh(h)
    diffs = np.abs(w[:, None] - w[None, :]).ravel()
    scale = max(1.0, float(np.max(np.abs(w))))
    gaps = diffs[diffs > 1e-9 * scale]
    if gaps.size == 0:
        return 1.0  # H proportional to identity: every difference vanishes
    g0 = gaps.min()
    if np.max(gaps) - g0 > 1e-9 * scale:
        raise ConfigurationError(
            "parameter-shift needs a generator whose nonzero eigenvalue gaps share one "
            f"magnitude; found gaps in [{g0:.6g}, {np.max(gaps):.6g}]"
        )
    return float(g0)


@dataclass(frozen=True)
class ParamStateFamily:
    """A differentiable map ``x -> rho(x)``.

    ``strategy`` selects how :func:`derivative` differentiates:

    * ``"analytic"`` calls ``derivative_fn``;
    * ``"analytic-commutator"`` uses ``-i[H, rho(x)]`` (unitary families only);
    * ``"central-difference"`` uses ``(rho(x+h) - rho(x-h)) / 2h``;
    * ``"parameter-shift"`` uses the two-point shift rule, exact for generators
      with a single eigenvalue gap.
    """

    dim: int
    evaluate: Callable[[float], np.ndarray]
    strategy: str = "central-difference"
    derivative_fn: Optional[Callable[[float], np.ndarray]] = None
    generator: Optional[HermitianGenerator] = None
    step: float = 1e-5
    shift: float = np.pi / 4
    label: str = ""
    _gap: float = field(default=1.0, repr=False)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown derivative strategy {self.strategy!r}")
        if self.strategy == "analytic" and self.derivative_fn is None:
            raise ConfigurationError("strategy 'analytic' requires a derivative_fn")
        if self.strategy in ("analytic-commutator", "parameter-shift") and self.generator is None:
            raise ConfigurationError(
                f"strategy {self.strategy!r} is only available for unitary-encoding families"
            )
        if self.strategy == "parameter-shift":
            if not 0 < abs(np.sin(self.shift)):
                raise ConfigurationError("parameter-shift needs sin(shift) != 0")
            object.__setattr__(self, "_gap", _shift_gap(self.generator.matrix, DEFAULT))
        if self.strategy == "central-difference" and not self.step > 0:
            raise ConfigurationError("central-difference step must be positive")

    def __call__(self, x: float) -> np.ndarray:
        return self.evaluate(float(x))

    def with_strategy(self, strategy: str, **kwargs) -> "ParamStateFamily":
        params = dict(
            dim=self.dim, evaluate=self.evaluate, strategy=strategy,
            derivative_fn=self.derivative_fn, generator=self.generator,
            step=self.step, shift=self.shift, label=self.label,
        )
        params.update(kwargs)
        return ParamStateFamily(**params)


def derivative(family: ParamStateFamily, x: float) -> np.ndarray:
    """``d rho / dx`` at ``x`` using the family's strategy (Hermitian result)."""
    x = float(x)
    s = family.strategy
    if s == "analytic":
        d = np.asarray(family.derivative_fn(x), dtype=complex)
    elif s == "analytic-commutator":
        h = family.generator.matrix
        rho = family(x)
        d = -1j * (h @ rho - rho @ h)
    elif s == "central-difference":
        h = family.step
        d = (family(x + h) - family(x - h)) / (2 * h)
    else:
        gap = family._gap
        s_ = family.shift / gap
        d = gap * (family(x + s_) - family(x - s_)) / (2 * np.sin(family.shift))
    return 0.5 * (d + d.conj().T)


def derivative_resolution(family: ParamStateFamily) -> float:
    """Nominal absolute error of :func:`derivative` for a unit-scale family.

    Zero for the exact strategies; ``h^2 + eps / h`` (truncation plus
    rounding) for central differences with step ``h``.
    """
    if family.strategy != "central-difference":
        return 0.0
    h = family.step
    return h * h + np.finfo(float).eps / h


# ----------------------------------------------------------------------------
# built-in families

def collective_spin(n_qubits: int, axis: str = "z") -> HermitianGenerator:
    """``J_l = sum_k sigma_l^(k) / 2`` on ``n_qubits`` qubits."""
    if n_qubits < 1:
        raise ArgumentError("n_qubits must be >= 1")
    if axis not in _PAULI:
        raise ArgumentError(f"axis must be one of x, y, z; got {axis!r}")
    eye = np.eye(2, dtype=complex)
    total = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for k in range(n_qubits):
        ops = [eye] * n_qubits
        ops[k] = _PAULI[axis]
        total += reduce(np.kron, ops)
    return HermitianGenerator(total / 2, label=f"J_{axis}[{n_qubits}]")


def bell_state() -> np.ndarray:
    """``(|00> + |11>) / sqrt(2)``."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1 / np.sqrt(2)
    return psi


def ghz_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return psi


def unitary_family(rho0, h, strategy: str = "analytic-commutator", **kwargs) -> ParamStateFamily:
    """``rho(x) = exp(-ixH) rho0 exp(ixH)`` with the exponential taken spectrally."""
    rho0 = as_matrix(rho0)
    gen = h if isinstance(h, HermitianGenerator) else HermitianGenerator(h)
    if gen.dim != rho0.shape[0]:
        raise ArgumentError(f"generator dim {gen.dim} != state dim {rho0.shape[0]}")
    w, v = hermitian_eig(gen.matrix)
    rho_eig = v.conj().T @ rho0 @ v
    omega = w[:, None] - w[None, :]

    def evaluate(x: float) -> np.ndarray:
        return v @ (rho_eig * np.exp(-1j * x * omega)) @ v.conj().T

    label = kwargs.pop("label", f"unitary[{gen.label}]")
    return ParamStateFamily(rho0.shape[0], evaluate, strategy, generator=gen, label=label, **kwargs)


def bell_family(axis: str = "z", **kwargs) -> ParamStateFamily:
    psi = bell_state()
    return unitary_family(np.outer(psi, psi.conj()), collective_spin(2, axis),
                          label=f"bell[J_{axis}]", **kwargs)


def ghz_family(n_qubits: int, axis: str = "z", **kwargs) -> ParamStateFamily:
    psi = ghz_state(n_qubits)
    return unitary_family(np.outer(psi, psi.conj()), collective_spin(n_qubits, axis),
                          label=f"ghz{n_qubits}[J_{axis}]", **kwargs)


def constant_family(rho) -> ParamStateFamily:
    rho = as_matrix(rho)
    zero = np.zeros_like(rho)
    return ParamStateFamily(rho.shape[0], lambda x: rho, "analytic",
                            derivative_fn=lambda x: zero, label="constant")


def classical_family(p_fn: Callable[[float], np.ndarray],
                     dp_fn: Callable[[float], np.ndarray], dim: int,
                     label: str = "diagonal") -> ParamStateFamily:
    """``rho(x) = diag(p(x))`` with analytic derivative ``diag(p'(x))``."""
    return ParamStateFamily(
        dim,
        lambda x: np.diag(np.asarray(p_fn(x), dtype=complex)),
        "analytic",
        derivative_fn=lambda x: np.diag(np.asarray(dp_fn(x), dtype=complex)),
        label=label,
    )


def softmax_family(weights: Sequence[float], rates: Sequence[float]) -> ParamStateFamily:
    """Diagonal family ``p_i(x) = w_i exp(k_i x) / sum_j w_j exp(k_j x)``.

    Outcomes sharing a rate keep a constant ratio, which is exactly the
    lossless-grouping condition.
    """
    w = np.asarray(weights, dtype=float)
    k = np.asarray(rates, dtype=float)
    if w.shape != k.shape or w.ndim != 1 or w.size == 0:
        raise ArgumentError("weights and rates must be equal-length 1-D sequences")
    if np.any(w <= 0):
        raise ArgumentError("weights must be positive")

    def p(x):
        e = w * np.exp(k * x - np.max(k * x))
        return e / e.sum()

    def dp(x):
        q = p(x)
        return q * (k - q @ k)

    return classical_family(p, dp, w.size, label="softmax")


def ensemble_family(states: Sequence, p_fn, dp_fn) -> ParamStateFamily:
    """``rho(x) = sum_i p_i(x) |psi_i><psi_i|`` with fixed, normalized ``psi_i``."""
    psis = np.array([np.asarray(s, dtype=complex).reshape(-1) for s in states])
    projs = np.einsum("ia,ib->iab", psis, psis.conj())

    def evaluate(x):
        return np.einsum("i,iab->ab", np.asarray(p_fn(x), dtype=complex), projs)

    def deriv(x):
        return np.einsum("i,iab->ab", np.asarray(dp_fn(x), dtype=complex), projs)

    return ParamStateFamily(psis.shape[1], evaluate, "analytic", derivative_fn=deriv,
                            label="ensemble")


def random_family(dim: int, rank: int | None = None, seed: SeedLike = None) -> ParamStateFamily:
    """Non-unitary random family ``G(x) G(x)^dagger / Tr`` along ``G(x) = G0 + x G1``.

    The rank of ``rho(x)`` is ``rank`` for generic ``x``; the derivative is
    analytic (quotient rule).
    """
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ArgumentError(f"need 1 <= rank <= dim, got rank={rank}, dim={dim}")
    rng = _rng(seed)
    g0 = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    g1 = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))

    def parts(x):
        g = g0 + x * g1
        a = g @ g.conj().T
        da = g1 @ g.conj().T + g @ g1.conj().T
        return a, da

    def evaluate(x):
        a, _ = parts(x)
        return a / np.trace(a).real

    def deriv(x):
        a, da = parts(x)
        t, dt = np.trace(a).real, np.trace(da).real
        return da / t - a * dt / t**2

    return ParamStateFamily(dim, evaluate, "analytic", derivative_fn=deriv,
                            label=f"random[{dim},{rank}]")


def probability_curve(family: ParamStateFamily, meas, x_grid):
    """Outcome probabilities and their derivatives along ``x_grid``.

    Args:
        family: the state family.
        meas: a ``ProjectiveMeasurement`` or a sequence of projectors.
        x_grid: 1-D sequence of parameter values.

    Returns:
        ``(P, dP)`` of shape ``(len(x_grid), n_outcomes)`` with
        ``P[k, i] = Tr(Pi_i rho(x_k))`` and ``dP[k, i] = Tr(Pi_i d rho(x_k))``.
    """
    projs = np.asarray(getattr(meas, "projectors", meas), dtype=complex)
    if projs.shape[1] != family.dim:
        raise ArgumentError(f"projector dim {projs.shape[1]} != family dim {family.dim}")
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    P = np.empty((xs.size, projs.shape[0]))
    dP = np.empty_like(P)
    for k, x in enumerate(xs):
        # Tr(Pi rho) = sum_ab Pi_ab rho_ba
        P[k] = np.einsum("iab,ba->i", projs, family(x)).real
        dP[k] = np.einsum("iab,ba->i", projs, derivative(family, x)).real
    return P, dP
