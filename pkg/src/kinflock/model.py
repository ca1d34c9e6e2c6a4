"""Grids, states, potentials, Maxwellians and moment extraction (d = 1)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erfc

from .errors import FlockError, GridMismatchError, TailMassError

BOUNDARIES = ("periodic", "copy-out", "reflect")

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class SpaceGrid:
    x_min: float
    x_max: float
    nx: int
    boundary: str = "periodic"
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nx < 4:
            raise FlockError(f"nx must be >= 4, got {self.nx}")
        if not self.x_max > self.x_min:
            raise FlockError("x_max must exceed x_min")
        if self.boundary not in BOUNDARIES:
            raise FlockError(f"unknown boundary {self.boundary!r}; expected one of {BOUNDARIES}")
        x = self.x_min + (np.arange(self.nx) + 0.5) * self.dx
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def refined(self, factor: int) -> "SpaceGrid":
        return SpaceGrid(self.x_min, self.x_max, self.nx * factor, self.boundary)

    def compatible(self, other: "SpaceGrid") -> bool:
        return (
            self.nx == other.nx
            and np.isclose(self.x_min, other.x_min)
            and np.isclose(self.x_max, other.x_max)
        )


@dataclass(frozen=True)
class PhaseGrid:
    space: SpaceGrid
    v_max: float
    nv: int
    v: np.ndarray = field(init=False, repr=False, compare=False)
    v_faces: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nv < 2 or self.nv % 2:
            raise FlockError(f"nv must be even and >= 2, got {self.nv}")
        if self.v_max <= 0:
            raise FlockError("v_max must be positive")
        v = -self.v_max + (np.arange(self.nv) + 0.5) * self.dv
        faces = -self.v_max + np.arange(self.nv + 1) * self.dv
        v.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "v_faces", faces)

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / self.nv

    @property
    def nx(self) -> int:
        return self.space.nx

    @property
    def dx(self) -> float:
        return self.space.dx

    @property
    def x(self) -> np.ndarray:
        return self.space.x

    @property
    def shape(self) -> tuple[int, int]:
        return (self.space.nx, self.nv)

    def cell_volume(self) -> float:
        return self.space.dx * self.dv


@dataclass(frozen=True)
class KineticState:
    """Cell-averaged phase-space density ``f[i, j]`` at ``(x_i, v_j)``."""

    grid: PhaseGrid
    f: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.f.shape != self.grid.shape:
            raise FlockError(f"f has shape {self.f.shape}, grid expects {self.grid.shape}")

    @property
    def mass(self) -> float:
        return float(self.f.sum() * self.grid.cell_volume())

    @property
    def momentum(self) -> float:
        return float((self.f @ self.grid.v).sum() * self.grid.cell_volume())

    def replace(self, f: np.ndarray, t: Optional[float] = None) -> "KineticState":
        return KineticState(self.grid, f, self.t if t is None else t)


@dataclass(frozen=True)
class MacroState:
    """Conservative pair (rho, P = rho u) on a space grid."""

    grid: SpaceGrid
    rho: np.ndarray
    p_mom: np.ndarray
    t: float = 0.0

    @property
    def mass(self) -> float:
        return float(self.rho.sum() * self.grid.dx)

    @property
    def momentum(self) -> float:
        return float(self.p_mom.sum() * self.grid.dx)

    def velocity(self, rho_floor: float = 0.0) -> np.ndarray:
        """Velocity with the vacuum rule: u = P/rho where rho > rho_floor, else 0."""
        live = self.rho > rho_floor
        u = np.zeros_like(self.rho)
        u[live] = self.p_mom[live] / self.rho[live]
        return u

    @classmethod
    def from_velocity(cls, grid: SpaceGrid, rho, u, t: float = 0.0) -> "MacroState":
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (grid.nx,)).copy()
        u = np.broadcast_to(np.asarray(u, dtype=float), (grid.nx,))
        return cls(grid, rho, rho * u, t)


@dataclass(frozen=True)
class Potential:
    """Confinement potential sampled at cell centres, with its gradient."""

    grid: SpaceGrid
    phi: np.ndarray
    grad: np.ndarray
    kind: str = "none"


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "none"
    a: float = 1.0
    values: Optional[tuple] = None
    admissibility_ceiling: float = 1e8

    def on(self, grid: SpaceGrid) -> Potential:
        x = grid.x
        if self.kind == "none":
            phi = np.zeros(grid.nx)
            grad = np.zeros(grid.nx)
        elif self.kind == "quadratic":
            if self.a < 0:
                raise FlockError("quadratic potential needs a >= 0")
            phi = 0.5 * self.a * x**2
            grad = self.a * x
        elif self.kind == "table":
            if self.values is None or len(self.values) != grid.nx:
                raise FlockError("tabulated potential must have one value per cell")
            phi = np.asarray(self.values, dtype=float)
            grad = _central_gradient(phi, grid)
        else:
            raise FlockError(f"unknown potential kind {self.kind!r}")
        if np.any(phi < 0):
            raise FlockError("potential must be non-negative")
        weight = np.exp(-phi).sum() * grid.dx
        if not weight < self.admissibility_ceiling:
            raise FlockError(f"sum of exp(-phi) dx = {weight:g} exceeds the admissibility ceiling")
        return Potential(grid, phi, grad, self.kind)


def _central_gradient(values: np.ndarray, grid: SpaceGrid) -> np.ndarray:
    if grid.periodic:
        return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * grid.dx)
    return np.gradient(values, grid.dx, edge_order=2)


@dataclass(frozen=True)
class ModelConfig:
    epsilon: float
    grid: PhaseGrid
    kernel: "object"  # alignment.KernelSpec; typed loosely to avoid an import cycle
    potential: PotentialSpec = PotentialSpec()
    cfl_hyp: float = 0.5
    cfl_force: float = 0.5
    rho_floor: Optional[float] = None
    tail_tol: float = 1e-10
    t_final: float = 0.5
    snapshot_dt: float = 0.05

    def __post_init__(self):
        if not self.epsilon > 0:
            raise FlockError("epsilon must be positive (math.inf disables the local term)")
        for name in ("cfl_hyp", "cfl_force"):
            c = getattr(self, name)
            if not 0 < c <= 1:
                raise FlockError(f"{name} must lie in (0, 1], got {c}")
        if self.rho_floor is not None and self.rho_floor <= 0:
            raise FlockError("rho_floor must be positive")
        if self.snapshot_dt <= 0 or self.t_final < 0:
            raise FlockError("snapshot_dt must be positive and t_final non-negative")

    def floor_for(self, mass: float) -> float:
        if self.rho_floor is not None:
            return self.rho_floor
        return default_rho_floor(mass, self.grid.space)


def default_rho_floor(mass: float, grid: SpaceGrid) -> float:
    return 1e-12 * max(mass, np.finfo(float).tiny) / grid.length


def gaussian_tail(u, v_max: float) -> np.ndarray:
    """Mass of N(u, 1) outside [-v_max, v_max]."""
    u = np.asarray(u, dtype=float)
    return 0.5 * erfc((v_max - u) / np.sqrt(2.0)) + 0.5 * erfc((v_max + u) / np.sqrt(2.0))


def maxwellian(grid: PhaseGrid, rho, u, tail_tol: float = 1e-10, t: float = 0.0) -> KineticState:
    """Normalized local Maxwellian rho (2 pi)^(-1/2) exp(-(v - u)^2 / 2) sampled at cell centres.

    The density-weighted fraction of mass falling outside the velocity box must
    stay below ``tail_tol``; otherwise the box is too small for this state.
    """
    nx = grid.nx
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (nx,))
    u = np.broadcast_to(np.asarray(u, dtype=float), (nx,))
    if np.any(rho < 0):
        raise FlockError("maxwellian needs rho >= 0")
    if not np.all(np.isfinite(u)):
        raise FlockError("maxwellian needs a finite velocity field")
    total = rho.sum()
    if total > 0:
        tail = float((rho * gaussian_tail(u, grid.v_max)).sum() / total)
        if tail > tail_tol:
            raise TailMassError(
                f"Maxwellian tail mass fraction {tail:.3e} beyond |v| = {grid.v_max} "
                f"exceeds tail_tol = {tail_tol:.1e}"
            )
    c = grid.v[None, :] - u[:, None]
    f = rho[:, None] * np.exp(-0.5 * c * c) / SQRT_2PI
    return KineticState(grid, f, t)


def moments(state: KineticState, rho_floor: float = 0.0) -> tuple[MacroState, np.ndarray]:
    """Density, momentum and (vacuum-ruled) velocity of each x-column."""
    g = state.grid
    rho = state.f.sum(axis=1) * g.dv
    j = (state.f @ g.v) * g.dv
    macro = MacroState(g.space, rho, j, state.t)
    return macro, macro.velocity(rho_floor)


def second_moment_flux(state: KineticState) -> np.ndarray:
    """Per-column integral of v^2 f dv."""
    g = state.grid
    return (state.f @ (g.v * g.v)) * g.dv


def stationary_profile(potential: Potential, mass: float) -> MacroState:
    """Flocking steady state rho = M exp(-phi) / sum(exp(-phi) dx) at rest."""
    if not mass > 0:
        raise FlockError("stationary_profile needs positive mass")
    grid = potential.grid
    w = np.exp(-(potential.phi - potential.phi.min()))
    rho = mass * w / (w.sum() * grid.dx)
    return MacroState(grid, rho, np.zeros(grid.nx))


def restrict(state: MacroState, coarse: SpaceGrid) -> MacroState:
    """Cell-average a fine MacroState onto a coarser grid over the same interval."""
    fine = state.grid
    if fine.nx % coarse.nx or not np.isclose(fine.x_min, coarse.x_min) or not np.isclose(
        fine.x_max, coarse.x_max
    ):
        raise GridMismatchError(f"cannot restrict nx={fine.nx} onto nx={coarse.nx}")
    r = fine.nx // coarse.nx
    rho = state.rho.reshape(coarse.nx, r).mean(axis=1)
    p = state.p_mom.reshape(coarse.nx, r).mean(axis=1)
    return MacroState(coarse, rho, p, state.t)
