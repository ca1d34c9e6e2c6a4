"""Entropies, dissipations and relative-entropy functionals.

All integrals are midpoint sums on the solver grids. ``f log f`` is extended
by zero at ``f = 0`` and the vacuum rule supplies ``u`` where the density is
below ``rho_floor``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import xlogy

from .alignment import pair_dissipation
from .errors import GridMismatchError, VacuumError
from .model import KineticState, MacroState, Potential, maxwellian, moments, second_moment_flux

# F(Maxwellian) - E(rho, u) per unit mass for the normalized Maxwellian in d = 1.
GAUSSIAN_OFFSET = -0.5 * np.log(2.0 * np.pi)

REPORT_COLUMNS = (
    "t",
    "F",
    "D1",
    "D2",
    "E",
    "rel_entropy",
    "rel_dissipation",
    "jensen_gap",
    "maxwellian_gap",
    "budget_a",
    "budget_b",
    "budget_c",
)


def _phi(potential, nx):
    return np.zeros(nx) if potential is None else potential.phi


def kinetic_entropy(f: KineticState, potential: Potential = None) -> float:
    g = f.grid
    phi = _phi(potential, g.nx)
    dens = xlogy(f.f, f.f) + f.f * (0.5 * g.v * g.v)[None, :] + f.f * phi[:, None]
    return float(dens.sum() * g.cell_volume())


def dissipation_d1(f: KineticState, rho_floor: float = 0.0, f_floor_rel: float = 1e-14) -> float:
    """Fisher-type dissipation sum (1/f) |d_v f - f (u - v)|^2 over interior velocity cells."""
    g = f.grid
    _, u = moments(f, rho_floor)
    ff = f.f
    fmax = float(ff.max()) if ff.size else 0.0
    if fmax <= 0.0:
        return 0.0
    dfdv = (ff[:, 2:] - ff[:, :-2]) / (2.0 * g.dv)
    fc = ff[:, 1:-1]
    resid = dfdv - fc * (u[:, None] - g.v[None, 1:-1])
    keep = fc >= f_floor_rel * fmax
    integrand = np.zeros_like(fc)
    integrand[keep] = resid[keep] ** 2 / fc[keep]
    return float(integrand.sum() * g.cell_volume())


def dissipation_d2(f: KineticState, K: np.ndarray) -> float:
    """Cucker-Smale dissipation collapsed through the moments rho, j, e = int v^2 f."""
    dx = f.grid.dx
    macro, _ = moments(f)
    e = second_moment_flux(f)
    rho, j = macro.rho, macro.p_mom
    return float((rho @ (K @ e) - j @ (K @ j)) * dx * dx)


def macro_entropy(U: MacroState, potential: Potential = None, rho_floor: float = 0.0) -> float:
    phi = _phi(potential, U.grid.nx)
    live = U.rho > rho_floor
    kin = np.zeros_like(U.rho)
    kin[live] = 0.5 * U.p_mom[live] ** 2 / U.rho[live]
    return float((kin + xlogy(U.rho, U.rho) + U.rho * phi).sum() * U.grid.dx)


def relative_pressure(q, rho):
    """p(q|rho) = q log(q/rho) - (q - rho); equals rho at q = 0."""
    q = np.asarray(q, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return xlogy(q, q / rho) - (q - rho)


def _check_pair(V: MacroState, U: MacroState):
    if not V.grid.compatible(U.grid):
        raise GridMismatchError("relative quantities need states on the same grid")
    if np.any(U.rho <= 0):
        raise VacuumError("reference state has vacuum; relative entropy undefined")


def relative_entropy_density(V: MacroState, U: MacroState, rho_floor: float = 0.0) -> np.ndarray:
    _check_pair(V, U)
    q = V.rho
    w = V.velocity(rho_floor) - U.velocity()
    kin = np.where(q > rho_floor, 0.5 * q * w * w, 0.0)
    return kin + relative_pressure(q, U.rho)


def relative_entropy(V: MacroState, U: MacroState, rho_floor: float = 0.0) -> float:
    """Integral of q |v - u|^2 / 2 + p(q|rho)."""
    return float(relative_entropy_density(V, U, rho_floor).sum() * U.grid.dx)


def relative_flux(V: MacroState, U: MacroState, rho_floor: float = 0.0) -> np.ndarray:
    """Momentum-row entry q (v - u)^2 of A(V) - A(U) - dA(U)(V - U)."""
    _check_pair(V, U)
    q = V.rho
    w = V.velocity(rho_floor) - U.velocity()
    return np.where(q > rho_floor, q * w * w, 0.0)


def jensen_gap(
    f: KineticState, potential: Potential = None, rho_floor: float = 0.0, normalized: bool = True
) -> float:
    """F(f) - E(moments f); with ``normalized`` the Maxwellian offset is removed so the gap is >= 0."""
    macro, _ = moments(f, rho_floor)
    gap = kinetic_entropy(f, potential) - macro_entropy(macro, potential, rho_floor)
    if normalized:
        gap -= GAUSSIAN_OFFSET * macro.mass
    return float(gap)


def maxwellian_gap(f: KineticState, rho_floor: float = 0.0) -> float:
    """Discrete L1 distance between f and the Maxwellian with its own moments."""
    macro, u = moments(f, rho_floor)
    m = maxwellian(f.grid, macro.rho, u, tail_tol=np.inf)
    return float(np.abs(f.f - m.f).sum() * f.grid.cell_volume())


@dataclass(frozen=True)
class BudgetTerms:
    kinetic_approx_term: float
    coupling_term: float
    dE_dt_term: float


def kinetic_defect(f: KineticState, rho_floor: float = 0.0) -> float:
    """Integral over x of |int (u^2 - v^2 + 1) f dv|."""
    macro, u = moments(f, rho_floor)
    col = u * u * macro.rho - second_moment_flux(f) + macro.rho
    return float(np.abs(col).sum() * f.grid.dx)


def coupling_term(V: MacroState, U: MacroState, K: np.ndarray, rho_floor: float = 0.0) -> float:
    """sum K_il q_i (rho_l - q_l) (u_l - u_i) (v_i - u_i) dx^2 with q, v the kinetic moments."""
    _check_pair(V, U)
    q = V.rho
    u = U.velocity()
    w = V.velocity(rho_floor) - u
    du = u[None, :] - u[:, None]
    val = np.einsum("il,i,l,il,i->", K, q, U.rho - q, du, w)
    return float(val * U.grid.dx**2)


def shifted_dissipation(V: MacroState, U: MacroState, K: np.ndarray, rho_floor: float = 0.0) -> float:
    """0.5 sum K q_i q_l [(v - u)_i - (v - u)_l]^2 dx^2."""
    _check_pair(V, U)
    w = V.velocity(rho_floor) - U.velocity()
    return pair_dissipation(V.rho, w, K, U.grid.dx)


def budget_terms(
    f: KineticState, U: MacroState, K: np.ndarray, potential: Potential = None, rho_floor: float = 0.0
) -> BudgetTerms:
    if not np.isclose(f.t, U.t, rtol=0, atol=1e-9):
        raise GridMismatchError(f"snapshots at different times: {f.t} vs {U.t}")
    if not f.grid.space.compatible(U.grid):
        raise GridMismatchError("kinetic and Euler snapshots live on different space grids")
    V, _ = moments(f, rho_floor)
    return BudgetTerms(
        kinetic_approx_term=kinetic_defect(f, rho_floor),
        coupling_term=coupling_term(V, U, K, rho_floor),
        dE_dt_term=shifted_dissipation(V, U, K, rho_floor),
    )


@dataclass(frozen=True)
class EntropyReport:
    t: float
    F: float
    D1: float
    D2: float
    E: float
    rel_entropy: float
    rel_dissipation: float
    jensen_gap: float
    maxwellian_gap: float
    budget_a: float
    budget_b: float
    budget_c: float

    def row(self) -> list[float]:
        d = asdict(self)
        return [d[c] for c in REPORT_COLUMNS]


def entropy_report(
    f: KineticState, U: MacroState, K: np.ndarray, potential: Potential = None, rho_floor: float = 0.0
) -> EntropyReport:
    """All scalar functionals of one kinetic snapshot against its Euler reference snapshot."""
    V, _ = moments(f, rho_floor)
    budget = budget_terms(f, U, K, potential, rho_floor)
    return EntropyReport(
        t=float(f.t),
        F=kinetic_entropy(f, potential),
        D1=dissipation_d1(f, rho_floor),
        D2=dissipation_d2(f, K),
        E=macro_entropy(V, potential, rho_floor),
        rel_entropy=relative_entropy(V, U, rho_floor),
        rel_dissipation=budget.dE_dt_term,
        jensen_gap=jensen_gap(f, potential, rho_floor),
        maxwellian_gap=maxwellian_gap(f, rho_floor),
        budget_a=budget.kinetic_approx_term,
        budget_b=budget.coupling_term,
        budget_c=budget.dE_dt_term,
    )
