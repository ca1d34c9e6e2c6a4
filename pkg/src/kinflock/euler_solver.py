"""Finite-volume solver for the isothermal Euler-flocking system and its symmetrizer checks.

Conservative variables U = (rho, P = rho u) obey

    rho_t + P_x = 0,
    P_t + (P^2/rho + rho)_x = alignment_source(U) - rho phi'.

Face states come from (optionally minmod-limited) primitive reconstruction,
fluxes from Rusanov or HLL with wave speeds |u| +- 1, and time stepping is the
two-stage SSP Runge-Kutta (Heun) method.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .alignment import alignment_dissipation_rate, alignment_source
from .entropy import macro_entropy
from .errors import CFLError, FlockError, SolverAbort, VacuumError
from .model import MacroState, Potential, SpaceGrid

logger = logging.getLogger(__name__)

FLUXES = ("rusanov", "hll")
RECONSTRUCTIONS = ("first-order", "minmod")
_FD_STEP = 1e-5


@dataclass(frozen=True)
class EulerScheme:
    flux: str = "rusanov"
    reconstruction: str = "minmod"
    cfl: float = 0.5
    rho_floor: float = 1e-12
    dt_max: float = math.inf
    # |u_x| above this (where rho is not negligible) is treated as incipient blow-up
    grad_limit: float = 1e3

    def __post_init__(self):
        if self.flux not in FLUXES:
            raise FlockError(f"flux must be one of {FLUXES}")
        if self.reconstruction not in RECONSTRUCTIONS:
            raise FlockError(f"reconstruction must be one of {RECONSTRUCTIONS}")
        if not 0 < self.cfl <= 1:
            raise FlockError("cfl must lie in (0, 1]")


def flux_A(rho, p_mom, rho_floor: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Physical flux (P, P^2/rho + rho) of the isothermal system."""
    rho = np.asarray(rho, dtype=float)
    p_mom = np.asarray(p_mom, dtype=float)
    if np.any(rho <= rho_floor):
        raise VacuumError(f"flux evaluated at density {float(np.min(rho)):.3e} <= floor {rho_floor:.1e}")
    return p_mom, p_mom * p_mom / rho + rho


def source_F(U: MacroState, K: np.ndarray, potential: Optional[Potential] = None):
    """Source pair (0, alignment_source(U) - rho phi')."""
    mom = alignment_source(U, K)
    if potential is not None:
        mom = mom - U.rho * potential.grad
    return np.zeros_like(U.rho), mom


# --------------------------------------------------------------------------- spatial operator


def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _pad(rho, u, boundary: str, n: int = 2):
    if boundary == "periodic":
        return np.pad(rho, n, mode="wrap"), np.pad(u, n, mode="wrap")
    if boundary == "copy-out":
        return np.pad(rho, n, mode="edge"), np.pad(u, n, mode="edge")
    # solid wall: mirror density, reverse velocity
    r = np.concatenate([rho[:n][::-1], rho, rho[-n:][::-1]])
    w = np.concatenate([-u[:n][::-1], u, -u[-n:][::-1]])
    return r, w


def _face_states(rho, u, boundary, reconstruction):
    nx = rho.size
    r, w = _pad(rho, u, boundary)
    if reconstruction == "minmod":
        dr = _minmod(r[1:-1] - r[:-2], r[2:] - r[1:-1])
        du = _minmod(w[1:-1] - w[:-2], w[2:] - w[1:-1])
    else:
        dr = np.zeros(nx + 2)
        du = np.zeros(nx + 2)
    # padded index k = cell k-1 in 0..nx+1 (one ghost per side), faces between k and k+1
    rc, uc = r[1:-1], w[1:-1]
    rL, uL = rc[:-1] + 0.5 * dr[:-1], uc[:-1] + 0.5 * du[:-1]
    rR, uR = rc[1:] - 0.5 * dr[1:], uc[1:] - 0.5 * du[1:]
    return rL, uL, rR, uR


def numerical_flux(rL, uL, rR, uR, kind: str = "rusanov", rho_floor: float = 0.0):
    PL, PR = rL * uL, rR * uR
    fL = flux_A(rL, PL, rho_floor)
    fR = flux_A(rR, PR, rho_floor)
    if kind == "rusanov":
        a = np.maximum(np.abs(uL), np.abs(uR)) + 1.0
        return tuple(0.5 * (fl + fr) - 0.5 * a * (qr - ql) for fl, fr, ql, qr in zip(fL, fR, (rL, PL), (rR, PR)))
    sL = np.minimum(uL, uR) - 1.0
    sR = np.maximum(uL, uR) + 1.0
    out = []
    for fl, fr, ql, qr in zip(fL, fR, (rL, PL), (rR, PR)):
        hll = (sR * fl - sL * fr + sL * sR * (qr - ql)) / (sR - sL)
        out.append(np.where(sL >= 0, fl, np.where(sR <= 0, fr, hll)))
    return tuple(out)


def spatial_operator(
    U: MacroState, scheme: EulerScheme, K: np.ndarray, potential: Optional[Potential] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Semi-discrete right-hand side dU/dt = -(flux differences)/dx + source."""
    g = U.grid
    if np.any(U.rho <= scheme.rho_floor):
        raise VacuumError(f"density {U.rho.min():.3e} at or below the floor; Euler reference needs rho > 0")
    u = U.p_mom / U.rho
    rL, uL, rR, uR = _face_states(U.rho, u, g.boundary, scheme.reconstruction)
    F_rho, F_P = numerical_flux(rL, uL, rR, uR, scheme.flux, scheme.rho_floor)
    s_rho, s_P = source_F(U, K, potential)
    d_rho = -(F_rho[1:] - F_rho[:-1]) / g.dx + s_rho
    d_P = -(F_P[1:] - F_P[:-1]) / g.dx + s_P
    return d_rho, d_P


def momentum_residual(U: MacroState, scheme: EulerScheme, K: np.ndarray, potential=None) -> float:
    """L1 norm of the discrete momentum-equation residual (zero for an exact discrete steady state)."""
    _, d_P = spatial_operator(U, scheme, K, potential)
    return float(np.abs(d_P).sum() * U.grid.dx)


# --------------------------------------------------------------------------- time loop


@dataclass
class EulerTrajectory:
    snapshots: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    int_align: list = field(default_factory=list)
    align: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def balance_defect(self) -> np.ndarray:
        """E(t) - E(0) + int_0^t alignment dissipation at each snapshot (zero for exact solutions)."""
        e = np.asarray(self.entropy)
        return e - e[0] + np.asarray(self.int_align)


def euler_dt(U: MacroState, scheme: EulerScheme) -> float:
    u = U.p_mom / U.rho
    return min(scheme.cfl * U.grid.dx / float(np.max(np.abs(u) + 1.0)), scheme.dt_max)


def _guard(U: MacroState, scheme: EulerScheme, where: str):
    if not (np.all(np.isfinite(U.rho)) and np.all(np.isfinite(U.p_mom))):
        raise SolverAbort(f"non-finite Euler state {where} at t={U.t:.6g}", t=U.t, substep=where)
    if np.any(U.rho <= scheme.rho_floor):
        raise SolverAbort(
            f"vacuum formed {where} at t={U.t:.6g} (min rho {U.rho.min():.3e})", t=U.t, substep=where
        )


def velocity_gradient(U: MacroState, rel_cut: float = 1e-6) -> float:
    """max |u_x| by centred differences over cells carrying non-negligible mass."""
    u = U.p_mom / U.rho
    du = np.gradient(u, U.grid.dx)
    live = U.rho > rel_cut * U.rho.max()
    return float(np.abs(du[live]).max()) if np.any(live) else 0.0


def euler_step(U: MacroState, dt: float, scheme: EulerScheme, K, potential) -> MacroState:
    if dt * float(np.max(np.abs(U.p_mom / U.rho) + 1.0)) / U.grid.dx > scheme.cfl * (1 + 1e-12):
        raise CFLError("Euler step exceeds its CFL bound")
    k1r, k1p = spatial_operator(U, scheme, K, potential)
    U1 = MacroState(U.grid, U.rho + dt * k1r, U.p_mom + dt * k1p, U.t + dt)
    _guard(U1, scheme, "RK stage 1")
    k2r, k2p = spatial_operator(U1, scheme, K, potential)
    rho = 0.5 * (U.rho + U1.rho + dt * k2r)
    P = 0.5 * (U.p_mom + U1.p_mom + dt * k2p)
    out = MacroState(U.grid, rho, P, U.t + dt)
    _guard(out, scheme, "RK stage 2")
    return out


def advance_euler(
    U0: MacroState,
    t_target: float,
    scheme: EulerScheme,
    K: np.ndarray,
    potential: Optional[Potential] = None,
    *,
    snapshot_dt: float = 0.05,
    dump_dir=None,
) -> EulerTrajectory:
    """SSP-RK2 evolution to t_target with snapshots every ``snapshot_dt`` (hit exactly)."""
    _guard(U0, scheme, "initial data")
    traj = EulerTrajectory()
    total = 0.0
    rate = alignment_dissipation_rate(U0, K, scheme.rho_floor)

    def record(U):
        traj.snapshots.append(U)
        traj.entropy.append(macro_entropy(U, potential, scheme.rho_floor))
        traj.int_align.append(total)
        traj.align.append(rate)
        traj.mass.append(U.mass)
        traj.momentum.append(U.momentum)
        if dump_dir is not None:
            write_snapshot(U, Path(dump_dir) / f"euler_{len(traj.snapshots) - 1:05d}.csv")

    record(U0)
    t0 = U0.t
    n = max(0, int(math.floor((t_target - t0) / snapshot_dt + 1e-9)))
    marks = [t0 + k * snapshot_dt for k in range(1, n + 1)]
    if t_target - (marks[-1] if marks else t0) > 1e-12 * max(1.0, abs(t_target)):
        marks.append(t_target)
    U = U0
    for mark in marks:
        while U.t < mark - 1e-13 * max(1.0, abs(mark)):
            dt = euler_dt(U, scheme)
            remaining = mark - U.t
            if dt >= remaining:
                dt = remaining
            elif dt > 0.5 * remaining:
                dt = 0.5 * remaining
            U = euler_step(U, dt, scheme, K, potential)
            new_rate = alignment_dissipation_rate(U, K, scheme.rho_floor)
            total += 0.5 * dt * (rate + new_rate)
            rate = new_rate
            traj.steps += 1
            grad = velocity_gradient(U)
            if grad > scheme.grad_limit:
                raise SolverAbort(
                    f"velocity gradient {grad:.3e} exceeds {scheme.grad_limit:g} at t={U.t:.6g}; "
                    "the smooth solution is likely breaking down",
                    t=U.t,
                    substep="gradient monitor",
                )
        U = MacroState(U.grid, U.rho, U.p_mom, mark)
        record(U)
    m0 = traj.mass[0]
    logger.info("euler run: %d steps, relative mass drift %.2e", traj.steps, abs(traj.mass[-1] - m0) / m0)
    return traj


def write_snapshot(U: MacroState, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    u = U.velocity()
    with open(path, "w") as fh:
        fh.write(f"# t={U.t!r}\n")
        fh.write("i,x,rho,u,P\n")
        for i in range(U.grid.nx):
            fh.write(f"{i},{float(U.grid.x[i])!r},{float(U.rho[i])!r},{float(u[i])!r},{float(U.p_mom[i])!r}\n")


# --------------------------------------------------------------------------- symmetrizer and entropy flux


def smooth_flux(w) -> np.ndarray:
    """Flux of the primitive-variable form w = (rho, u): (rho u, u^2/2 + log rho)."""
    rho, u = w
    return np.array([rho * u, 0.5 * u * u + math.log(rho)])


def _fd_jacobian(fun, z, step=_FD_STEP) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    cols = []
    for k in range(z.size):
        h = step * max(1.0, abs(z[k]))
        e = np.zeros_like(z)
        e[k] = h
        cols.append((np.asarray(fun(z + e)) - np.asarray(fun(z - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class SymmetrizerReport:
    asymmetry: float
    c0: float
    symmetrizer: np.ndarray
    jacobian: np.ndarray


def symmetrizer_check(rho: float, u: float) -> SymmetrizerReport:
    """Asymmetry of A0 grad f for A0 = diag(1/rho, rho), and c0 with A0 between 1/c0 and c0."""
    if rho <= 0:
        raise VacuumError("symmetrizer undefined at rho <= 0")
    A0 = np.diag([1.0 / rho, rho])
    J = _fd_jacobian(smooth_flux, [rho, u])
    S = A0 @ J
    eig = np.diag(A0)
    c0 = float(max(eig.max(), 1.0 / eig.min()))
    return SymmetrizerReport(float(np.abs(S - S.T).max()), c0, A0, J)


def entropy_density(U, phi: float = 0.0) -> float:
    rho, P = U
    return P * P / (2.0 * rho) + rho * math.log(rho) + rho * phi


def entropy_flux(U, phi: float = 0.0) -> float:
    """Closed-form entropy flux u (E + rho) of the isothermal system with potential."""
    rho, P = U
    return P / rho * (entropy_density(U, phi) + rho)


@dataclass(frozen=True)
class EntropyFluxReport:
    residual: float
    dQ: np.ndarray
    dA_dE: np.ndarray


def entropy_flux_check(rho: float, p_mom: float, phi: float = 0.0) -> EntropyFluxReport:
    """Max residual of dQ/dU_j = sum_k dA_k/dU_j dE/dU_k by centred finite differences."""
    if rho <= 0:
        raise VacuumError("entropy flux undefined at rho <= 0")
    U = np.array([rho, p_mom], dtype=float)
    dQ = _fd_jacobian(lambda z: entropy_flux(z, phi), U)
    dE = _fd_jacobian(lambda z: entropy_density(z, phi), U)
    dA = _fd_jacobian(lambda z: np.array(flux_A(z[0], z[1])), U)
    rhs = dA.T @ dE
    return EntropyFluxReport(float(np.abs(dQ - rhs).max()), dQ, rhs)


def constant_state(grid: SpaceGrid, rho: float, u: float, t: float = 0.0) -> MacroState:
    return MacroState.from_velocity(grid, rho, u, t)
