"""Constant-coefficient solver A : D^2 u = f by frequency-wise symbol inversion.

Every Fourier mode decouples: with z = k/L and the unit direction d = z/|z|,

    A : u^(k) (x) (2 pi i z) (x) (2 pi i z) = f^(k)
    =>  u^(k) = - (1 / (4 pi^2 |z|^2)) (A : d (x) d)^{-1} f^(k),

where the inverse symbol is cof(S)^T / det(S).  The k = 0 mode is the gauge:
second derivatives annihilate constants, so the solver fixes mean(u) = 0 and
records the dropped mean of f.  The regularized family replaces 1/|z|^2 by
h(z) = 1/(|z|^2 + eps), whose multiplier h(z)|z|^2 stays in [0, 1] and tends
to 1 as eps -> 0, giving a monotone approximation of the exact solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSymbolError, EstimateBreachError, InputError
from .fields import SPECTRAL, GridSpec, VectorField, l2_norm, spectral_hessian
from .tensors import (
    DET_FLOOR_COEF,
    SymTensor4,
    cofactor_transpose,
    ellipticity_constant,
)

MEAN_TOLERANCE = 1e-8


def _flat_freqs(grid: GridSpec) -> np.ndarray:
    """Integer frequency components flattened to (n, M^n) in C order."""
    out = np.empty((grid.n, grid.points))
    for i, ka in enumerate(grid.freq_axes()):
        out[i] = np.broadcast_to(ka, grid.shape).ravel()
    return out


def _unit_symbol_stack(A: SymTensor4, grid: GridSpec):
    """Unit-direction symbols at every nonzero frequency.

    Returns (mask of k != 0, |z|^2 on the mask, stacked symbols (K, N, N)).
    """
    freqs = _flat_freqs(grid)
    zsq = (freqs**2).sum(axis=0) / grid.L**2
    mask = zsq > 0
    z = freqs[:, mask] / grid.L
    unit = z / np.sqrt(zsq[mask])
    S = np.einsum("abij,ik,jk->kab", A.entries, unit, unit)
    return mask, zsq[mask], S


def _inverse_symbols(A: SymTensor4, grid: GridSpec, S: np.ndarray, mask: np.ndarray) -> np.ndarray:
    det = np.linalg.det(S)
    scale = np.sqrt((S**2).sum(axis=(1, 2)))
    floor = DET_FLOOR_COEF * np.maximum(scale, np.finfo(float).tiny) ** A.N
    bad = np.abs(det) < floor
    if np.any(bad):
        flat_index = np.flatnonzero(mask)[int(np.argmax(bad))]
        k = np.unravel_index(flat_index, grid.shape)
        k_int = tuple(int(v) for v in np.asarray(grid.integer_freqs())[list(k)])
        raise DegenerateSymbolError(
            f"degenerate symbol at frequency k={k_int}", frequency=k_int
        )
    return cofactor_transpose(S) / det[:, None, None]


def apply_operator(A: SymTensor4, u: VectorField) -> VectorField:
    """A : D^2 u, evaluated diagonally in frequency; physical output."""
    g = u.grid
    if (A.N, A.n) != (g.N, g.n):
        raise InputError(f"tensor (N={A.N}, n={A.n}) does not match grid (N={g.N}, n={g.n})")
    coef = u.to_spectral().data.reshape(g.N, g.points)
    freqs = _flat_freqs(g)
    z = freqs / g.L
    # A_{a b i j} z_i z_j c_b(k), times the second-derivative factor -4 pi^2
    Sz = np.einsum("abij,ik,jk->abk", A.entries, z, z)
    out = -4 * np.pi**2 * np.einsum("abk,bk->ak", Sz, coef)
    field = VectorField(g, out.reshape((g.N,) + g.shape), SPECTRAL)
    return field.to_physical()


def _operator_coefficients(A: SymTensor4, uhat_flat: np.ndarray, zsq: np.ndarray, S: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Spectral coefficients of A : D^2 u on the nonzero-frequency mask."""
    applied = np.einsum("kab,bk->ak", S, uhat_flat[:, mask])
    return -4 * np.pi**2 * zsq * applied


@dataclass(frozen=True, eq=False)
class LinearSolveResult:
    """Solution plus the per-solve verification numbers."""

    u: VectorField
    residual_l2: float
    hessian_ratio: float
    regularization: str
    dropped_mean: np.ndarray
    nu: float
    rhs_l2: float
    hessian_l2: float
    operator_l2: float
    multiplier_bounds: tuple[float, float]
    multiplier_identity_error: float
    mean_warning: bool

    def report(self) -> dict:
        return {
            "residual_l2": self.residual_l2,
            "hessian_ratio": self.hessian_ratio,
            "regularization": self.regularization,
            "dropped_mean": self.dropped_mean.tolist(),
            "nu": self.nu,
            "rhs_l2": self.rhs_l2,
            "hessian_l2": self.hessian_l2,
            "operator_l2": self.operator_l2,
            "multiplier_bounds": list(self.multiplier_bounds),
            "multiplier_identity_error": self.multiplier_identity_error,
            "mean_warning": self.mean_warning,
        }


def solve_linear(
    A: SymTensor4,
    f: VectorField,
    epsilon: float | None = None,
    nu: float | None = None,
    mean_tolerance: float = MEAN_TOLERANCE,
) -> LinearSolveResult:
    """Invert A : D^2 u = f on the torus, exactly or with the eps-regularized multiplier.

    The k = 0 part of f cannot be matched and is dropped into
    ``dropped_mean`` (with a warning flag when it is large relative to
    ``||f||``); the solution is returned with zero mean.  ``nu`` may be
    passed to skip the ellipticity search when the caller already certified
    the tensor.
    """
    g = f.grid
    if (A.N, A.n) != (g.N, g.n):
        raise InputError(f"tensor (N={A.N}, n={A.n}) does not match grid (N={g.N}, n={g.n})")
    if epsilon is not None and epsilon <= 0:
        raise InputError(f"regularization epsilon must be positive, got {epsilon}")
    if nu is None:
        nu = ellipticity_constant(A).nu
        if nu <= 0:
            raise InputError(f"tensor is not rank-one positive: nu = {nu}")

    fhat = f.to_spectral().data.reshape(g.N, g.points)
    fnorm = float(np.sqrt(g.volume * (np.abs(fhat) ** 2).sum()))
    dropped = fhat[:, 0].real.copy()
    mean_warning = bool(
        np.linalg.norm(dropped) > mean_tolerance * max(fnorm, np.finfo(float).tiny)
    )

    mask, zsq, S = _unit_symbol_stack(A, g)
    inv = _inverse_symbols(A, g, S, mask)
    if epsilon is None:
        weight = 1.0 / (4 * np.pi**2 * zsq)
        multiplier = np.ones_like(zsq)
        regularization = "exact"
    else:
        weight = 1.0 / (4 * np.pi**2 * (zsq + epsilon))
        multiplier = zsq / (zsq + epsilon)
        regularization = f"epsilon={epsilon:g}"

    uhat = np.zeros_like(fhat)
    uhat[:, mask] = -weight * np.einsum("kab,bk->ak", inv, fhat[:, mask])
    u = VectorField(g, uhat.reshape((g.N,) + g.shape), SPECTRAL).to_physical()

    op_coef = _operator_coefficients(A, uhat, zsq, S, mask)
    target = multiplier * fhat[:, mask]
    identity_error = float(np.abs(op_coef - target).max()) if op_coef.size else 0.0

    residual_coef = op_coef - fhat[:, mask]
    residual_l2 = float(np.sqrt(g.volume * (np.abs(residual_coef) ** 2).sum()))

    hess_sq = g.volume * float(
        (((4 * np.pi**2 * zsq) ** 2) * (np.abs(uhat[:, mask]) ** 2).sum(axis=0)).sum()
    )
    op_sq = g.volume * float((np.abs(op_coef) ** 2).sum())
    hessian_l2 = float(np.sqrt(hess_sq))
    operator_l2 = float(np.sqrt(op_sq))
    hessian_ratio = hessian_l2 / operator_l2 if operator_l2 > 0 else 0.0

    return LinearSolveResult(
        u=u,
        residual_l2=residual_l2,
        hessian_ratio=hessian_ratio,
        regularization=regularization,
        dropped_mean=dropped,
        nu=nu,
        rhs_l2=fnorm,
        hessian_l2=hessian_l2,
        operator_l2=operator_l2,
        multiplier_bounds=(float(multiplier.min()), float(multiplier.max())),
        multiplier_identity_error=identity_error,
        mean_warning=mean_warning,
    )


def hessian_estimate_check(A: SymTensor4, u: VectorField, nu: float | None = None) -> float:
    """nu ||D^2 u|| / ||A : D^2 u||; must come out <= 1 for a certified tensor.

    Zero fields give 0 by convention.  A vanishing denominator with a
    nonvanishing hessian would contradict the estimate and raises.
    """
    if nu is None:
        nu = ellipticity_constant(A).nu
    hess = spectral_hessian(u, SPECTRAL)
    hnorm = l2_norm(hess)
    opnorm = l2_norm(apply_operator(A, u))
    if opnorm == 0.0:
        if hnorm == 0.0:
            return 0.0
        raise EstimateBreachError(
            f"A : D^2 u vanished while ||D^2 u|| = {hnorm:.3e}; estimate breached"
        )
    return float(nu * hnorm / opnorm)


def pairing_spectrum(u: VectorField, f: VectorField) -> np.ndarray:
    """Per-frequency pairing -f^(k) . conj(u^(k)) on k != 0.

    For a solution of the elliptic system this equals the rank-one hermitian
    form scaled by 4 pi^2 |z|^2, hence is real and nonnegative mode by mode.
    """
    g = u.grid
    uhat = u.to_spectral().data.reshape(g.N, g.points)
    fhat = f.to_spectral().data.reshape(g.N, g.points)
    freqs = _flat_freqs(g)
    mask = (freqs**2).sum(axis=0) > 0
    return -(fhat[:, mask] * np.conj(uhat[:, mask])).sum(axis=0)
