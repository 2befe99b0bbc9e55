import numpy as np
import pytest

from recirc.fullspace import FullSpaceSystem
from recirc.mms import ManufacturedSolution
from recirc.turbulence import ClosureParams


@pytest.fixture(scope="module")
def mms():
    return ManufacturedSolution(nu=0.05, nu_tur=0.02)


def test_exact_velocity_divergence_free_and_boundary_zero(mms, space8):
    v0 = mms.initial_velocity(space8)
    assert np.abs(v0[space8.boundary_vdofs]).max() == 0.0
    G = space8.eval_grads(v0)
    div = G[..., 0, 0] + G[..., 1, 1]
    # interpolation leaves an O(h^2) pointwise divergence; the exact field is free
    xy = space8.qpoints
    h = 1e-6
    vxp = mms.velocity(xy[..., 0] + h, xy[..., 1], 0.0)[..., 0]
    vxm = mms.velocity(xy[..., 0] - h, xy[..., 1], 0.0)[..., 0]
    vyp = mms.velocity(xy[..., 0], xy[..., 1] + h, 0.0)[..., 1]
    vym = mms.velocity(xy[..., 0], xy[..., 1] - h, 0.0)[..., 1]
    div_exact = (vxp - vxm + vyp - vym) / (2 * h)
    assert np.abs(div_exact).max() <= 1e-8
    assert np.abs(div).max() <= 0.5  # discrete one is small but nonzero


def test_forcing_matches_finite_difference_operator(mms):
    # independent oracle: central differences of the strong momentum operator
    h = 1e-5
    nu, nut = mms.nu, mms.nu_tur

    def vel(x, y, t):
        return mms.velocity(np.atleast_1d(x), np.atleast_1d(y), t)[0]

    def stress_tensor(x, y, t):
        gx = (vel(x + h, y, t) - vel(x - h, y, t)) / (2 * h)
        gy = (vel(x, y + h, t) - vel(x, y - h, t)) / (2 * h)
        G = np.array([[gx[0], gy[0]], [gx[1], gy[1]]])
        E = 0.5 * (G + G.T)
        return (2 * nu + 2 * nut * np.sqrt((E * E).sum())) * E

    rng = np.random.default_rng(1)
    for _ in range(4):
        x, y, t = rng.uniform(0.15, 0.85, 3)
        dvdt = (vel(x, y, t + h) - vel(x, y, t - h)) / (2 * h)
        gx = (vel(x + h, y, t) - vel(x - h, y, t)) / (2 * h)
        gy = (vel(x, y + h, t) - vel(x, y - h, t)) / (2 * h)
        v = vel(x, y, t)
        conv = v[0] * gx + v[1] * gy
        dSx = (stress_tensor(x + h, y, t) - stress_tensor(x - h, y, t)) / (2 * h)
        dSy = (stress_tensor(x, y + h, t) - stress_tensor(x, y - h, t)) / (2 * h)
        divS = np.array([dSx[0, 0] + dSy[0, 1], dSx[1, 0] + dSy[1, 1]])
        P = mms.pressure_amplitude
        gradp = P * np.array(
            [np.pi * np.cos(np.pi * x) * np.cos(np.pi * y),
             -np.pi * np.sin(np.pi * x) * np.sin(np.pi * y)]
        )
        oracle = dvdt + conv - divS + gradp
        F = mms.forcing(np.array([x]), np.array([y]), t)[0]
        assert np.abs(F - oracle).max() <= 5e-5


def test_project_divfree(space8):
    fs = FullSpaceSystem(space8, ClosureParams(0.05, 0.0))
    rng = np.random.default_rng(3)
    w = rng.standard_normal(space8.n_velocity)
    pw = fs.project_divfree(w)
    assert np.linalg.norm(space8.B @ pw) <= 1e-10 * max(1.0, np.abs(w).max())
    assert np.abs(pw[space8.boundary_vdofs]).max() == 0.0
    # idempotent and M-orthogonal remainder
    ppw = fs.project_divfree(pw)
    assert np.abs(ppw - pw).max() <= 1e-10
    for eta in (fs.project_divfree(rng.standard_normal(space8.n_velocity)),):
        assert abs((w - pw) @ (space8.M @ eta)) <= 1e-10


def test_short_mms_run_error_magnitude(mms, space8):
    params = ClosureParams(mms.nu, mms.nu_tur)
    fs = FullSpaceSystem(space8, params, source=mms.forcing)
    errs = []
    fs.integrate(
        mms.initial_velocity(space8), T=0.05, dt=1e-3,
        observer=lambda t, z: errs.append(mms.velocity_error(space8, z, t)),
    )
    # stays at the interpolation-error level, no blowup
    assert max(errs) <= 5 * errs[0] + 1e-12
    assert all(np.isfinite(errs))


def test_residual_load_matches_reduced_rhs_structure(space8):
    # cross-check between the two independent nonlinear assemblies
    from recirc.eigenbasis import solve_stokes_eigen
    from recirc.galerkin import ReducedSystem
    from recirc.lifting import build_lifting
    from recirc.pumps import PumpSet

    params = ClosureParams(0.03, 0.08)
    basis = solve_stokes_eigen(space8, 8)
    lifting = build_lifting(space8, PumpSet([]), params.nu)
    sys_ = ReducedSystem(space8, basis, lifting, PumpSet([]), params)
    fs = FullSpaceSystem(space8, params)
    rng = np.random.default_rng(9)
    for _ in range(5):
        z = 0.4 * rng.standard_normal(8)
        modal = sys_.rhs(z, 0.2)
        oracle = basis.fields.T @ fs.residual_load(basis.expand(z), 0.2)
        assert np.abs(modal - oracle).max() <= 1e-11 * max(1.0, np.abs(oracle).max())
