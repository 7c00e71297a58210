"""Projective measurements on a finite-dimensional system."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError
from .states import as_matrix
from .tolerances import DEFAULT, Tolerances


class ProjectiveMeasurement:
    """A complete set of mutually orthogonal projectors ``{Pi_i}``."""

    __slots__ = ("projectors",)

    def __init__(self, projectors: Iterable, tol: Tolerances = DEFAULT):
        mats = [as_matrix(p) for p in projectors]
        if not mats:
            raise ArgumentError("a measurement needs at least one projector")
        dim = mats[0].shape[0]
        if any(m.shape != (dim, dim) for m in mats):
            raise ArgumentError("projectors have inconsistent dimensions")
        eps = tol.proj
        for i, p in enumerate(mats):
            if np.max(np.abs(p - p.conj().T)) > eps:
                raise ArgumentError(f"projector {i} is not Hermitian")
            if np.max(np.abs(p @ p - p)) > eps:
                raise ArgumentError(f"projector {i} is not idempotent")
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                if np.max(np.abs(mats[i] @ mats[j])) > eps:
                    raise ArgumentError(f"projectors {i} and {j} are not orthogonal")
        if np.max(np.abs(sum(mats) - np.eye(dim))) > eps:
            raise ArgumentError("projectors do not sum to the identity")
        arr = np.array(mats)
        arr.setflags(write=False)
        self.projectors = arr

    @property
    def count(self) -> int:
        return self.projectors.shape[0]

    @property
    def dim(self) -> int:
        return self.projectors.shape[1]

    def __len__(self):
        return self.count

    def __iter__(self):
        return iter(self.projectors)

    def __repr__(self):
        return f"ProjectiveMeasurement(dim={self.dim}, count={self.count})"

    def probabilities(self, rho) -> np.ndarray:
        """``p_i = Tr(Pi_i rho)``; also maps a derivative to ``dp_i``."""
        return np.einsum("iab,ba->i", self.projectors, np.asarray(rho, dtype=complex)).real

    def merged(self, groups: Sequence[Sequence[int]]) -> "ProjectiveMeasurement":
        """Measurement with projectors ``Pi'_g = sum_{j in g} Pi_j``."""
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(self.count)):
            raise ArgumentError("groups must partition the projector indices")
        return ProjectiveMeasurement([self.projectors[list(g)].sum(axis=0) for g in groups])

    @classmethod
    def from_basis(cls, basis, groups: Sequence[Sequence[int]] | None = None,
                   tol: Tolerances = DEFAULT) -> "ProjectiveMeasurement":
        """Rank-1 projectors onto the columns of a unitary ``basis``,
        optionally summed over ``groups`` of column indices."""
        u = as_matrix(basis)
        groups = groups if groups is not None else [[i] for i in range(u.shape[1])]
        projs = []
        for g in groups:
            cols = u[:, list(g)]
            projs.append(cols @ cols.conj().T)
        return cls(projs, tol)

    @classmethod
    def computational(cls, dim: int) -> "ProjectiveMeasurement":
        return cls.from_basis(np.eye(dim))
