import numpy as np
import pytest

from recirc.mesh import build_rect_mesh
from recirc.quadrature import duffy_rule
from recirc.space import MixedSpace, _p2_values, _p2_grads
from recirc.turbulence import (
    ClosureParams,
    apply_A,
    beta,
    convect,
    potential_D,
    strain_norm,
    stress,
)


def sym(mat):
    return 0.5 * (mat + mat.T)


def random_strains(rng, count, min_norm=0.0):
    out = []
    while len(out) < count:
        e = sym(rng.standard_normal((2, 2)))
        if strain_norm(e) >= min_norm:
            out.append(e)
    return out


def test_potential_values():
    p = ClosureParams(nu=1.0, nu_tur=0.0)
    assert potential_D(np.zeros((2, 2)), p) == 0.0
    e = np.diag([1.0, 1.0])  # e:e = 2
    assert abs(potential_D(e, p) - 2.0) <= 1e-15
    p = ClosureParams(nu=1e-30, nu_tur=1.0)
    e = np.diag([np.sqrt(2), np.sqrt(2)])  # e:e = 4
    assert abs(potential_D(e, p) - 16.0 / 3.0) <= 1e-12


def test_beta_values():
    p = ClosureParams(nu=0.7, nu_tur=5.0)
    assert abs(beta(np.zeros((2, 2)), p) - 1.4) <= 1e-15
    p = ClosureParams(nu=1.0, nu_tur=1.0)
    e = np.diag([3.0 / np.sqrt(2), -3.0 / np.sqrt(2)])  # e:e = 9
    assert abs(beta(e, p) - 8.0) <= 1e-12


def test_stress_reduces_to_newtonian():
    p = ClosureParams(nu=0.3, nu_tur=0.0)
    rng = np.random.default_rng(0)
    for e in random_strains(rng, 10):
        assert np.allclose(stress(e, p), 2 * 0.3 * e, atol=1e-15)


def test_beta_lower_bound():
    p = ClosureParams(nu=0.02, nu_tur=0.5)
    rng = np.random.default_rng(1)
    for e in random_strains(rng, 100):
        assert beta(e, p) >= 2 * p.nu


def test_stress_is_potential_derivative_order2():
    # central differences of D converge to stress : direction at order 2
    p = ClosureParams(nu=0.4, nu_tur=0.8)
    rng = np.random.default_rng(42)
    hs = [1e-2 / 2**k for k in range(5)]
    for e in random_strains(rng, 100, min_norm=0.1):
        d = sym(rng.standard_normal((2, 2)))
        exact = float((stress(e, p) * d).sum())
        errs = [
            abs((potential_D(e + h * d, p) - potential_D(e - h * d, p)) / (2 * h) - exact)
            for h in hs
        ]
        floor = 1e-10 * max(1.0, abs(exact))  # central-difference roundoff
        for e1, e2 in zip(errs, errs[1:]):
            if min(e1, e2) < floor:
                continue
            assert 3.4 <= e1 / e2 <= 4.6


def test_pointwise_monotonicity():
    p = ClosureParams(nu=0.05, nu_tur=0.7)
    rng = np.random.default_rng(7)
    for _ in range(200):
        e1 = sym(rng.standard_normal((2, 2)))
        e2 = sym(rng.standard_normal((2, 2)))
        gap = float(((stress(e1, p) - stress(e2, p)) * (e1 - e2)).sum())
        lower = 2 * p.nu * float(((e1 - e2) ** 2).sum())
        assert gap >= lower - 1e-12 * (1 + abs(gap))


@pytest.fixture(scope="module")
def space4():
    return MixedSpace(build_rect_mesh(1, 1, 4, 4))


def test_apply_A_zero_strain(space4):
    p = ClosureParams(nu=0.1, nu_tur=0.2)
    rng = np.random.default_rng(3)
    test = rng.standard_normal((space4.n_velocity, 5))
    zeros = np.zeros(space4.n_velocity)
    out = apply_A(space4, zeros, zeros, p, test)
    assert np.abs(out).max() <= 1e-14
    # rigid rotation has zero strain as well
    rot = space4.interpolate(lambda x, y: np.column_stack([-y, x]))
    out = apply_A(space4, rot, zeros, p, test)
    assert np.abs(out).max() <= 1e-12


def test_apply_A_linear_limit_matches_stiffness(space4):
    # nu_tur = 0: <A(z), xi> = nu (K_eps (zg + z)) . xi
    p = ClosureParams(nu=0.37, nu_tur=0.0)
    rng = np.random.default_rng(11)
    z = rng.standard_normal(space4.n_velocity)
    zg = rng.standard_normal(space4.n_velocity)
    test = rng.standard_normal((space4.n_velocity, 8))
    out = apply_A(space4, z, zg, p, test)
    oracle = (p.nu * (space4.K_eps @ (z + zg))) @ test
    scale = max(1.0, np.abs(oracle).max())
    assert np.abs(out - oracle).max() <= 1e-12 * scale


def test_apply_A_integrated_monotonicity(space4):
    p = ClosureParams(nu=0.05, nu_tur=0.3)
    rng = np.random.default_rng(19)
    zg = space4.interpolate(lambda x, y: np.column_stack([y * (1 - y), 0 * x]))
    for _ in range(20):
        z1 = rng.standard_normal(space4.n_velocity)
        z2 = rng.standard_normal(space4.n_velocity)
        d = (z1 - z2)[:, None]
        gap = float((apply_A(space4, z1, zg, p, d) - apply_A(space4, z2, zg, p, d))[0])
        eps_d = space4.strain_samples(z1 - z2)
        lower = 2 * p.nu * space4.integrate((eps_d * eps_d).sum(axis=(-2, -1)))
        assert gap >= lower - 1e-12 * (1 + abs(gap))


def test_convect_self_pairing_vanishes(space4):
    rng = np.random.default_rng(23)
    for _ in range(10):
        w = rng.standard_normal(space4.n_velocity)
        u = rng.standard_normal(space4.n_velocity)
        val = float(convect(space4, w, u, u[:, None])[0])
        scale = np.abs(u).max() ** 2 * np.abs(w).max()
        assert abs(val) <= 1e-12 * max(1.0, scale)


def test_convect_zero_advected(space4):
    rng = np.random.default_rng(29)
    w = rng.standard_normal(space4.n_velocity)
    test = rng.standard_normal((space4.n_velocity, 6))
    out = convect(space4, w, np.zeros(space4.n_velocity), test)
    assert np.abs(out).max() == 0.0


def test_convect_constant_advecting_field_oracle():
    # one-celled mesh, constant w, linear u: exact integrals by high-order rule
    space = MixedSpace(build_rect_mesh(1, 1, 1, 1))
    w = space.interpolate(lambda x, y: np.column_stack([np.full_like(x, 0.7), np.full_like(x, -0.3)]))
    u = space.interpolate(lambda x, y: np.column_stack([2 * x + y, x - y]))
    rng = np.random.default_rng(31)
    eta = rng.standard_normal(space.n_velocity)

    val = float(convect(space, w, u, eta[:, None])[0])

    # oracle: 1/2 [ int (grad u  w) . eta - int (grad eta  w) . u ] with an
    # independent collapsed rule and direct shape-function evaluation
    rule = duffy_rule(6)
    N = _p2_values(rule.points)
    Gh = _p2_grads(rule.points)
    mesh = space.mesh
    p = mesh.vertices[mesh.cells]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    invJT = np.linalg.inv(J).transpose(0, 2, 1)
    grads = np.einsum("cab,qlb->cqla", invJT, Gh)
    ns = space.n_scalar

    def vals_of(f):
        return np.stack([f[c * ns + space.cell_dofs] @ N.T for c in range(2)], axis=-1)

    def grads_of(f):
        return np.stack(
            [np.einsum("cl,cqlb->cqb", f[c * ns + space.cell_dofs], grads) for c in range(2)],
            axis=-2,
        )

    wq = space.areas[:, None] * rule.weights[None, :]
    first = np.einsum("cq,cqab,cqb,cqa->", wq, grads_of(u), vals_of(w), vals_of(eta))
    second = np.einsum("cq,cqab,cqb,cqa->", wq, grads_of(eta), vals_of(w), vals_of(u))
    oracle = 0.5 * (first - second)
    assert abs(val - oracle) <= 1e-12 * max(1.0, abs(oracle))

    # divergence-free w: the skew form equals the raw integral up to the
    # boundary flux term 1/2 int (w.n)(u.eta), nonzero here since u and eta
    # do not vanish on the boundary
    from numpy.polynomial.legendre import leggauss

    from recirc.space import _edge_trace

    x1, w1 = leggauss(8)
    s = 0.5 * (x1 + 1.0)
    T = _edge_trace(s)
    bnd = 0.0
    for b, dofs in zip(space.mesh.boundary, space.bnd_edge_dofs):
        d = np.array(dofs)
        wn = sum((T @ w[c * ns + d]) * b.normal[c] for c in range(2))
        ueta = sum((T @ u[c * ns + d]) * (T @ eta[c * ns + d]) for c in range(2))
        bnd += b.length * float(0.5 * w1 @ (wn * ueta))
    raw = float(first)
    assert abs(val - (raw - 0.5 * bnd)) <= 1e-12 * max(1.0, abs(raw))


def test_params_validation():
    with pytest.raises(ValueError):
        ClosureParams(nu=0.0)
    with pytest.raises(ValueError):
        ClosureParams(nu=0.1, nu_tur=-1.0)
