"""Nonlocal alignment: Cucker-Smale and Motsch-Tadmor operators, macroscopic source.

Both kinetic operators are affine in v, so they are returned as the pair of
per-column coefficients ``(a, b)`` with ``L(x_i, v) = a_i - b_i v``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import KernelError, VacuumError
from .model import KineticState, MacroState, SpaceGrid, moments

KERNEL_SYMMETRY_TOL = 1e-12


def _separation(grid: SpaceGrid) -> np.ndarray:
    d = grid.x[:, None] - grid.x[None, :]
    if grid.periodic:
        L = grid.length
        d = d - L * np.round(d / L)
    return d


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Communication kernel K(x, y); ``matrix(grid)`` gives K_il = K(x_i, x_l)."""

    kind: str = "constant"
    k0: float = 1.0
    amplitude: float = 1.0
    width: float = 1.0
    table: Optional[np.ndarray] = None

    def matrix(self, grid: SpaceGrid) -> np.ndarray:
        if self.kind == "constant":
            if self.k0 < 0:
                raise KernelError("constant kernel must be non-negative")
            K = np.full((grid.nx, grid.nx), float(self.k0))
        elif self.kind == "gaussian":
            if self.amplitude < 0 or self.width <= 0:
                raise KernelError("gaussian kernel needs amplitude >= 0 and width > 0")
            d = _separation(grid)
            K = self.amplitude * np.exp(-0.5 * (d / self.width) ** 2)
        elif self.kind == "table":
            if self.table is None or self.table.shape != (grid.nx, grid.nx):
                raise KernelError(f"tabulated kernel must be {grid.nx}x{grid.nx}")
            K = np.array(self.table, dtype=float)
            check_kernel(K)
            # round-off asymmetry below the tolerance is removed so that
            # antisymmetric sums cancel exactly
            K = 0.5 * (K + K.T)
        else:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        return K

    @classmethod
    def from_csv(cls, path) -> "KernelSpec":
        with open(Path(path), newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        K = np.array(rows, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise KernelError(f"kernel table in {path} is not square")
        check_kernel(K)
        return cls(kind="table", table=K)


def check_kernel(K: np.ndarray) -> None:
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise KernelError("kernel matrix must be square")
    if not np.all(np.isfinite(K)):
        raise KernelError("kernel matrix must be finite")
    if np.any(K < 0):
        raise KernelError("kernel matrix must be non-negative")
    scale = max(1.0, float(np.abs(K).max()))
    asym = float(np.abs(K - K.T).max())
    if asym > KERNEL_SYMMETRY_TOL * scale:
        raise KernelError(f"kernel matrix asymmetric (max |K - K^T| = {asym:.3e})")


@dataclass(frozen=True)
class MollifierSpec:
    radius: float
    shape: str = "gaussian"

    def matrix(self, grid: SpaceGrid) -> np.ndarray:
        """Rows phi_r(x_i - x_l), renormalised so that sum_l phi_il dx = 1."""
        if self.radius <= 0:
            raise KernelError("mollifier radius must be positive")
        s = _separation(grid) / self.radius
        if self.shape == "gaussian":
            w = np.exp(-0.5 * s * s)
        elif self.shape == "bump":
            w = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            w[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
        else:
            raise KernelError(f"unknown mollifier shape {self.shape!r}")
        norm = w.sum(axis=1, keepdims=True) * grid.dx
        if np.any(norm <= 0):
            raise KernelError("mollifier radius too small for the grid (empty support)")
        return w / norm


def cs_operator(f: KineticState, K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cucker-Smale operator as affine coefficients: L[f](x_i, v) = a_i - b_i v."""
    macro, _ = moments(f)
    dx = f.grid.dx
    a = (K @ macro.p_mom) * dx
    b = (K @ macro.rho) * dx
    return a, b


def mt_operator(
    f: KineticState, phi: np.ndarray, rho_floor: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Motsch-Tadmor operator (phi * j)/(phi * rho) - v, returned as ``(a, b)`` with b = 1."""
    macro, _ = moments(f)
    dx = f.grid.dx
    den = (phi @ macro.rho) * dx
    if np.any(den <= rho_floor):
        raise VacuumError("mollified density vanishes; Motsch-Tadmor operator undefined")
    a = (phi @ macro.p_mom) * dx / den
    return a, np.ones_like(a)


def alignment_source(U: MacroState, K: np.ndarray) -> np.ndarray:
    """Momentum source sum_l K_il rho_i rho_l (u_l - u_i) dx, written via P = rho u."""
    dx = U.grid.dx
    return (U.rho * (K @ U.p_mom) - U.p_mom * (K @ U.rho)) * dx


def alignment_dissipation_rate(U: MacroState, K: np.ndarray, rho_floor: float = 0.0) -> float:
    """Half the kernel-weighted squared velocity spread, 0.5 sum K rho rho (u_i - u_l)^2 dx^2."""
    u = U.velocity(rho_floor)
    return pair_dissipation(U.rho, u, K, U.grid.dx)


def pair_dissipation(weight: np.ndarray, w: np.ndarray, K: np.ndarray, dx: float) -> float:
    """0.5 sum_il K_il q_i q_l (w_i - w_l)^2 dx^2, evaluated in the manifestly non-negative form."""
    diff = w[:, None] - w[None, :]
    return float(0.5 * np.einsum("i,il,l,il->", weight, K, weight, diff * diff) * dx * dx)
