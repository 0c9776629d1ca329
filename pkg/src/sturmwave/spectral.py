"""Weighted transforms between grid samples and mode coefficients.

``forward`` computes ``c_n = int f g psi_n`` and ``inverse`` sums
``c_n phi_n``; since ``g phi_n = psi_n`` the pair is biorthogonal.  The
Sobolev scale is defined on coefficients: ``||c||_k^2 = sum lambda_n^k c_n^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolver import SpectralBasis
from .errors import SpectralError, UsageError


@dataclass(frozen=True)
class SpectralCoefficients:
    values: np.ndarray
    basis: SpectralBasis

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.basis.N,):
            raise UsageError(f"expected {self.basis.N} coefficients, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise SpectralError("non-finite spectral coefficient")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __mul__(self, a: float) -> SpectralCoefficients:
        return SpectralCoefficients(a * self.values, self.basis)

    __rmul__ = __mul__

    def __add__(self, other: SpectralCoefficients) -> SpectralCoefficients:
        _same_basis(self.basis, other.basis)
        return SpectralCoefficients(self.values + other.values, self.basis)

    def to_list(self) -> list[float]:
        return [float(v) for v in self.values]


def _same_basis(a: SpectralBasis, b: SpectralBasis) -> None:
    if a is not b:
        raise UsageError("coefficients belong to a different basis")


def _check_samples(basis: SpectralBasis, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[-1:] != (basis.grid.m + 1,):
        raise UsageError(f"samples of length {f.shape[-1] if f.ndim else 0} do not match a grid with {basis.grid.m + 1} nodes")
    return f


def forward(basis: SpectralBasis, f) -> SpectralCoefficients:
    """``c_n = int_0^1 f g psi_n`` by the grid quadrature."""
    f = _check_samples(basis, f)
    if f.ndim != 1:
        raise UsageError("forward expects one sampled function")
    return SpectralCoefficients(forward_many(basis, f[None, :])[0], basis)


def forward_many(basis: SpectralBasis, f: np.ndarray) -> np.ndarray:
    """Coefficient rows for a stack of sampled functions (shape ``(k, m+1)``)."""
    f = _check_samples(basis, f)
    return (f * (basis.weight.g * basis.grid.weights)) @ basis.psi_matrix.T


def inverse(basis: SpectralBasis, c: SpectralCoefficients) -> np.ndarray:
    """``sum_n c_n phi_n`` on the grid."""
    _same_basis(basis, c.basis)
    return c.values @ basis.phi_matrix


def sobolev_norm(c: SpectralCoefficients, k: float) -> float:
    """``sqrt(sum lambda_n^k c_n^2)``."""
    lam = c.basis.lambdas
    if k < 0 and lam[0] <= 0:
        raise SpectralError("negative-order norm needs lambda_1 > 0", n=1)
    if k == 0:
        return float(np.sqrt(np.sum(c.values**2)))
    return float(np.sqrt(np.sum(lam**k * c.values**2)))
