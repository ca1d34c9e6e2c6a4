import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from kinflock.alignment import KernelSpec
from kinflock.entropy import (
    GAUSSIAN_OFFSET,
    REPORT_COLUMNS,
    budget_terms,
    coupling_term,
    dissipation_d1,
    dissipation_d2,
    entropy_report,
    jensen_gap,
    kinetic_defect,
    kinetic_entropy,
    macro_entropy,
    maxwellian_gap,
    relative_entropy,
    relative_entropy_density,
    relative_flux,
    relative_pressure,
    shifted_dissipation,
)
from kinflock.errors import GridMismatchError, VacuumError
from kinflock.model import KineticState, MacroState, PhaseGrid, PotentialSpec, SpaceGrid, maxwellian

NX = 6
pos = arrays(np.float64, NX, elements=st.floats(0.2, 3.0))
vel = arrays(np.float64, NX, elements=st.floats(-1.5, 1.5))


def gauss(v, u=0.0):
    return np.exp(-0.5 * (v - u) ** 2) / np.sqrt(2 * np.pi)


def bimodal(grid, weight=0.5):
    return KineticState(
        grid, maxwellian(grid, weight, -1.0, tail_tol=1).f + maxwellian(grid, 1 - weight, 1.0, tail_tol=1).f
    )


# ------------------------------------------------------------------ kinetic entropy


def test_kinetic_entropy_zero(phase_grid):
    assert kinetic_entropy(KineticState(phase_grid, np.zeros(phase_grid.shape))) == 0.0


def test_kinetic_entropy_of_standard_maxwellian():
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 10.0, 128)
    oracle = quad(lambda v: gauss(v) * np.log(gauss(v)) + 0.5 * v * v * gauss(v), -10, 10, epsabs=1e-14)[0]
    closed = -0.5 * np.log(2 * np.pi) + 0.5 - 0.5 * 1.0 - 0.5 + 0.5  # rho log rho - log(2pi)/2 - 1/2 + 1/2
    assert oracle == pytest.approx(closed, abs=1e-12)
    assert kinetic_entropy(maxwellian(g, 1.0, 0.0)) == pytest.approx(oracle, abs=1e-10)


def test_kinetic_entropy_converges_under_refinement():
    vals = []
    for vmax, nv in ((4.0, 16), (6.0, 32), (8.0, 64), (10.0, 128)):
        g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), vmax, nv)
        vals.append(kinetic_entropy(maxwellian(g, 1.3, 0.4, tail_tol=1.0)))
    diffs = np.abs(np.diff(vals))
    assert diffs[0] > diffs[1] > diffs[2]


def test_kinetic_entropy_potential_term():
    g = PhaseGrid(SpaceGrid(-1.0, 1.0, 8, "reflect"), 8.0, 64)
    pot = PotentialSpec("quadratic").on(g.space)
    f = maxwellian(g, 1.0, 0.0)
    extra = kinetic_entropy(f, pot) - kinetic_entropy(f)
    rho = f.f.sum(axis=1) * g.dv
    assert extra == pytest.approx((rho * pot.phi).sum() * g.dx, rel=1e-12)


# ------------------------------------------------------------------ dissipations


def test_d1_zero_state(phase_grid):
    assert dissipation_d1(KineticState(phase_grid, np.zeros(phase_grid.shape))) == 0.0


def test_d1_of_maxwellian_decays_with_resolution():
    vals, dvs = [], []
    for nv in (64, 128, 256):
        g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 6.0, nv)
        vals.append(dissipation_d1(maxwellian(g, 1.0, 0.3, tail_tol=1e-6)))
        dvs.append(g.dv)
    orders = np.log2(np.array(vals[:-1]) / np.array(vals[1:]))
    assert np.all(orders >= 2.0)
    # the centred difference of a Gaussian is off by dv^2 (z^3 - 3z) f / 6 with z = v - u,
    # so the leading term of D1 is M dv^4 E[z^2 (z^2 - 3)^2] / 36 = M dv^4 / 6
    np.testing.assert_allclose(vals, np.array(dvs) ** 4 / 6, rtol=0.05)


def test_d1_bimodal_matches_quadrature():
    f = lambda v: 0.5 * gauss(v, -1) + 0.5 * gauss(v, 1)  # noqa: E731
    df = lambda v: -0.5 * (v + 1) * gauss(v, -1) - 0.5 * (v - 1) * gauss(v, 1)  # noqa: E731
    oracle = quad(lambda v: (df(v) + v * f(v)) ** 2 / f(v), -10, 10, epsabs=1e-14, limit=200)[0]
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 10.0, 4096)
    assert oracle > 0
    assert dissipation_d1(bimodal(g)) == pytest.approx(oracle, abs=1e-6)


def test_d2_trivial_cases(phase_grid):
    f = maxwellian(phase_grid, 1.0, 0.0)
    assert dissipation_d2(f, np.zeros((16, 16))) == 0.0
    single = np.zeros(phase_grid.shape)
    single[:, 40] = 3.0
    assert dissipation_d2(KineticState(phase_grid, single), np.ones((16, 16))) == pytest.approx(0.0, abs=1e-13)


def test_d2_moment_collapse_matches_fourfold_sum():
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 8.0, 16)
    f = maxwellian(g, 1.0, 0.0)
    K = np.ones((4, 4))
    brute = 0.0
    for i in range(4):
        for l in range(4):
            for j in range(16):
                for k in range(16):
                    brute += K[i, l] * f.f[i, j] * f.f[l, k] * (g.v[j] - g.v[k]) ** 2
    brute *= 0.5 * (g.dx * g.dv) ** 2
    assert dissipation_d2(f, K) == pytest.approx(brute, rel=1e-12)
    fine = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 8.0, 64)
    assert dissipation_d2(maxwellian(fine, 1.0, 0.0), K) == pytest.approx(1.0, abs=1e-10)


@given(arrays(np.float64, (4, 8), elements=st.floats(0.0, 2.0)))
def test_d1_d2_nonnegative(values):
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4, "reflect"), 3.0, 8)
    f = KineticState(g, values)
    assert dissipation_d1(f) >= 0.0
    assert dissipation_d2(f, KernelSpec("gaussian").matrix(g.space)) >= -1e-12


# ------------------------------------------------------------------ macro entropy


def test_macro_entropy_examples():
    g = SpaceGrid(0.0, 1.0, 8)
    assert macro_entropy(MacroState.from_velocity(g, 1.0, 0.0)) == 0.0
    assert macro_entropy(MacroState.from_velocity(g, 1.0, 1.0)) == pytest.approx(0.5)
    assert macro_entropy(MacroState.from_velocity(g, 0.0, 0.0)) == 0.0


def test_maxwellian_entropy_offset_is_constant_per_mass(rng):
    g = PhaseGrid(SpaceGrid(0.0, 2.0, 8), 10.0, 128)
    pot = PotentialSpec("quadratic").on(g.space)
    for _ in range(5):
        rho = rng.uniform(0.2, 3.0, 8)
        u = rng.uniform(-1.5, 1.5, 8)
        f = maxwellian(g, rho, u)
        M = rho.sum() * g.dx
        U = MacroState.from_velocity(g.space, rho, u)
        per_mass = (kinetic_entropy(f, pot) - macro_entropy(U, pot)) / M
        assert per_mass == pytest.approx(GAUSSIAN_OFFSET, abs=1e-6)


# ------------------------------------------------------------------ relative quantities


def test_relative_pressure_examples():
    assert relative_pressure(1.7, 1.7) == 0.0
    oracle = quad(lambda z: (np.e - z) / z, 1.0, np.e)[0]
    assert relative_pressure(np.e, 1.0) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(1.0, abs=1e-12)
    val = relative_pressure(2.0, 1.0)
    assert val == pytest.approx(quad(lambda z: (2 - z) / z, 1.0, 2.0)[0], abs=1e-12)
    assert val == pytest.approx(2 * np.log(2) - 1)
    assert val >= 0.25
    assert relative_pressure(0.0, 0.6) == pytest.approx(0.6)


@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_relative_pressure_quadratic_lower_bound(q, rho):
    p = float(relative_pressure(q, rho))
    assert p >= 0.5 * min(1 / q, 1 / rho) * (q - rho) ** 2 - 1e-12


def _direct_relative_entropy(V, U, phi):
    """E(V) - E(U) - dE(U)(V - U) cell by cell with the gradient of E written out by hand."""
    q, P = V.rho, V.p_mom
    rho, Pu = U.rho, U.p_mom

    def E(r, m):
        return m * m / (2 * r) + r * np.log(r) + r * phi

    d_rho = -Pu * Pu / (2 * rho * rho) + np.log(rho) + 1 + phi
    d_P = Pu / rho
    return E(q, P) - E(rho, Pu) - d_rho * (q - rho) - d_P * (P - Pu)


@given(pos, vel, pos, vel)
def test_relative_entropy_matches_three_term_definition(q, v, rho, u):
    g = SpaceGrid(-1.0, 1.0, NX, "reflect")
    phi = 0.5 * g.x**2
    V = MacroState.from_velocity(g, q, v)
    U = MacroState.from_velocity(g, rho, u)
    np.testing.assert_allclose(relative_entropy_density(V, U), _direct_relative_entropy(V, U, phi), atol=1e-10)
    assert relative_entropy(V, U) >= 0.0


def test_relative_entropy_examples():
    g = SpaceGrid(0.0, 1.0, 10)
    U = MacroState.from_velocity(g, 1.0, np.sin(g.x))
    assert relative_entropy(U, U) == 0.0
    V = MacroState.from_velocity(g, 1.0, np.sin(g.x) + 0.2)
    assert relative_entropy(V, U) == pytest.approx(0.02)
    vac = MacroState.from_velocity(g, 0.0, 0.0)
    assert relative_entropy(vac, U) == pytest.approx(1.0)  # p(0|rho) = rho
    with pytest.raises(VacuumError):
        relative_entropy(U, vac)
    with pytest.raises(GridMismatchError):
        relative_entropy(U, MacroState.from_velocity(SpaceGrid(0.0, 1.0, 12), 1.0, 0.0))


def test_relative_entropy_separates_states(rng):
    g = SpaceGrid(0.0, 1.0, 10)
    U = MacroState.from_velocity(g, 1.0 + 0.3 * np.sin(2 * np.pi * g.x), 0.1)
    for delta in (0.05, 0.2):
        for _ in range(10):
            k = rng.integers(10)
            rho, u = U.rho.copy(), U.velocity().copy()
            if rng.random() < 0.5:
                rho[k] += delta
            else:
                u[k] -= delta
            val = relative_entropy(MacroState.from_velocity(g, rho, u), U)
            # both parts are at least quadratic in the perturbation of a single cell
            assert val >= 0.5 * delta**2 * min(0.7, 1 / 1.6) * g.dx * 0.9


def test_relative_flux_examples():
    g = SpaceGrid(0.0, 1.0, 4)
    U = MacroState.from_velocity(g, 1.0, 0.3)
    assert np.all(relative_flux(U, U) == 0.0)
    V = MacroState.from_velocity(g, 2.0, 0.8)
    np.testing.assert_allclose(relative_flux(V, U), 0.5)


def _flux(w):
    rho, P = w
    return np.array([P, P * P / rho + rho])


@given(st.floats(0.3, 3.0), st.floats(-1.5, 1.5), st.floats(0.3, 3.0), st.floats(-1.5, 1.5))
def test_relative_flux_matches_definition(q, v, rho, u):
    Vw, Uw = np.array([q, q * v]), np.array([rho, rho * u])
    h = 1e-6
    J = np.column_stack([(_flux(Uw + h * e) - _flux(Uw - h * e)) / (2 * h) for e in np.eye(2)])
    direct = _flux(Vw) - _flux(Uw) - J @ (Vw - Uw)
    g = SpaceGrid(0.0, 1.0, 4)
    closed = relative_flux(MacroState.from_velocity(g, q, v), MacroState.from_velocity(g, rho, u))[0]
    assert direct[0] == pytest.approx(0.0, abs=1e-6)
    assert direct[1] == pytest.approx(closed, abs=1e-6)


@given(pos, vel, pos, vel)
def test_relative_flux_bounded_by_twice_relative_entropy(q, v, rho, u):
    g = SpaceGrid(0.0, 1.0, NX)
    V, U = MacroState.from_velocity(g, q, v), MacroState.from_velocity(g, rho, u)
    assert relative_flux(V, U).sum() * g.dx <= 2 * relative_entropy(V, U) + 1e-12


# ------------------------------------------------------------------ Jensen and Maxwellian gaps


def test_jensen_gap_of_maxwellian_is_the_offset():
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 6), 10.0, 128)
    f = maxwellian(g, 1.0 + 0.5 * np.sin(2 * np.pi * g.x), 0.4)
    M = f.mass
    assert jensen_gap(f, normalized=False) == pytest.approx(GAUSSIAN_OFFSET * M, abs=1e-9)
    assert jensen_gap(f) == pytest.approx(0.0, abs=1e-9)


def test_jensen_gap_bimodal_exceeds_maxwellian():
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 10.0, 128)
    assert jensen_gap(bimodal(g)) > jensen_gap(maxwellian(g, 1.0, 0.0)) + 0.1
    assert jensen_gap(KineticState(g, np.zeros(g.shape)), normalized=False) == 0.0


@given(arrays(np.float64, (4, 16), elements=st.floats(0.0, 3.0)))
def test_jensen_gap_nonnegative(values):
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4, "reflect"), 5.0, 16)
    f = KineticState(g, values)
    assert jensen_gap(f, PotentialSpec("table", values=(0.0, 1.0, 2.0, 0.5)).on(g.space)) >= -1e-10


def test_maxwellian_gap_examples():
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 10.0, 64)
    assert maxwellian_gap(maxwellian(g, 1.2, 0.3)) <= 1e-14
    assert maxwellian_gap(KineticState(g, np.zeros(g.shape))) == 0.0


def test_maxwellian_gap_bimodal_matches_quadrature():
    kink = np.arccosh(np.exp(0.5))  # where the mixture crosses the unit Gaussian
    oracle = quad(
        lambda v: abs(0.5 * gauss(v, -1) + 0.5 * gauss(v, 1) - gauss(v)), -12, 12, points=[-kink, kink], epsabs=1e-14, limit=400
    )[0]
    g = PhaseGrid(SpaceGrid(0.0, 1.0, 4), 12.0, 2**17)
    val = maxwellian_gap(bimodal(g))
    assert val > 0
    assert val == pytest.approx(oracle, abs=1e-8)


# ------------------------------------------------------------------ budget terms


def _pair(grid_n=12):
    g = PhaseGrid(SpaceGrid(-2.0, 2.0, grid_n, "reflect"), 8.0, 64)
    x = g.x
    U = MacroState.from_velocity(g.space, np.exp(-x * x / 2) + 0.1, 0.5 * np.sin(x), 0.25)
    return g, U


def test_budget_of_matching_maxwellian():
    g, U = _pair()
    f = maxwellian(g, U.rho, U.velocity(), t=0.25)
    K = KernelSpec("gaussian").matrix(g.space)
    b = budget_terms(f, U, K)
    assert b.kinetic_approx_term <= 1e-10
    assert abs(b.coupling_term) <= 1e-14 and abs(b.dE_dt_term) <= 1e-14


def test_budget_same_velocity_different_density():
    g, U = _pair()
    f = maxwellian(g, 1.3 * U.rho, U.velocity(), t=0.25)
    b = budget_terms(f, U, KernelSpec("gaussian").matrix(g.space))
    assert b.dE_dt_term == pytest.approx(0.0, abs=1e-14)
    assert b.coupling_term == pytest.approx(0.0, abs=1e-12)


def test_budget_errors():
    g, U = _pair()
    K = KernelSpec("gaussian").matrix(g.space)
    with pytest.raises(GridMismatchError):
        budget_terms(maxwellian(g, U.rho, 0.0, t=0.3), U, K)
    g2 = PhaseGrid(SpaceGrid(-2.0, 2.0, 10, "reflect"), 8.0, 64)
    with pytest.raises(GridMismatchError):
        budget_terms(maxwellian(g2, 1.0, 0.0, t=0.25), U, np.ones((10, 10)))


def _brute_coupling(V, U, K):
    q, w = V.rho, V.velocity() - U.velocity()
    u = U.velocity()
    n = q.size
    s = sum(K[i, l] * q[i] * (U.rho[l] - q[l]) * (u[l] - u[i]) * w[i] for i in range(n) for l in range(n))
    return s * U.grid.dx**2


@given(pos, vel, pos, vel)
def test_coupling_term_and_its_bound(q, v, rho, u):
    g = SpaceGrid(-1.0, 1.0, NX, "reflect")
    V, U = MacroState.from_velocity(g, q, v), MacroState.from_velocity(g, rho, u)
    K = KernelSpec("gaussian").matrix(g)
    b = coupling_term(V, U, K)
    assert b == pytest.approx(_brute_coupling(V, U, K), abs=1e-12)
    # Cauchy-Schwarz with the quadratic lower bound on p(q|rho):
    # |b| <= 4 Kmax |u|_inf sqrt(M_q (M_q + M_rho)) int E(V|U)
    Mq, Mr = V.mass, U.mass
    bound = 4 * K.max() * np.abs(u).max() * np.sqrt(Mq * (Mq + Mr)) * relative_entropy(V, U)
    assert abs(b) <= bound + 1e-12
    assert shifted_dissipation(V, U, K) >= 0.0


def test_kinetic_defect_of_maxwellian_is_small():
    g, U = _pair()
    f = maxwellian(g, U.rho, U.velocity())
    assert kinetic_defect(f) <= 1e-10
    assert kinetic_defect(bimodal(g)) > 0.1


def test_entropy_report_row_order():
    g, U = _pair()
    f = maxwellian(g, U.rho, U.velocity(), t=0.25)
    rep = entropy_report(f, U, KernelSpec("gaussian").matrix(g.space))
    row = rep.row()
    assert len(row) == len(REPORT_COLUMNS)
    assert row[0] == 0.25 and row[REPORT_COLUMNS.index("E")] == rep.E
    for name in ("D1", "D2", "rel_entropy", "rel_dissipation", "jensen_gap", "maxwellian_gap"):
        assert getattr(rep, name) >= -1e-12
