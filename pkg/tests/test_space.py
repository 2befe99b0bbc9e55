import numpy as np
import pytest
from scipy.sparse.linalg import eigsh

from recirc.errors import MeshError
from recirc.mesh import TaggedMesh, build_rect_mesh
from recirc.quadrature import duffy_rule
from recirc.space import MixedSpace, _p2_values


def const_field(space, cx, cy):
    ns = space.n_scalar
    return np.concatenate([np.full(ns, cx), np.full(ns, cy)])


def test_constant_field_in_stiffness_kernels(space8):
    c = const_field(space8, 1.7, -0.3)
    assert np.abs(space8.K_eps @ c).max() <= 1e-12
    assert np.abs(space8.K_grad @ c).max() <= 1e-12


def test_rigid_rotation_strain_free(space8):
    v = space8.interpolate(lambda x, y: np.column_stack([-y, x]))
    assert abs(v @ space8.K_eps @ v) <= 1e-12
    # int |grad v|^2 = 2 |Omega| for the rotation field
    assert abs(v @ space8.K_grad @ v - 2.0) <= 1e-10


def _oracle_l2_sq(space, u):
    """Independent L2 norm: high-order collapsed Gauss rule, direct evaluation."""
    rule = duffy_rule(6)
    N = _p2_values(rule.points)
    ns = space.n_scalar
    total = 0.0
    for comp in range(2):
        Uc = u[comp * ns + space.cell_dofs]  # (nt, 6)
        vals = Uc @ N.T  # (nt, nq)
        total += float(np.einsum("c,q,cq->", space.areas, rule.weights, vals**2))
    return total


def test_mass_matrix_matches_quadrature_oracle(space8):
    rng = np.random.default_rng(3)
    for _ in range(5):
        u = rng.standard_normal(space8.n_velocity)
        uMu = u @ space8.M @ u
        assert abs(uMu - _oracle_l2_sq(space8, u)) <= 1e-10 * uMu


def test_degenerate_cell_rejected():
    m = build_rect_mesh(1, 1, 2, 2)
    vertices = m.vertices.copy()
    # collapse one cell to zero area
    c = m.cells[0]
    vertices[c[2]] = 0.5 * (vertices[c[0]] + vertices[c[1]])
    with pytest.raises(MeshError):
        MixedSpace(TaggedMesh(1, 1, vertices, m.cells))


def test_norms_of_zero_field(space8):
    z = np.zeros(space8.n_velocity)
    for kind in ("L2", "L3", "L4", "H1semi", "W13semi", "L2boundary"):
        assert space8.norm(z, kind) == 0.0


def test_norms_of_constant_field(space8):
    v = const_field(space8, -2.5, 0.0)
    assert abs(space8.norm(v, "L2") - 2.5) <= 1e-12
    assert space8.norm(v, "H1semi") <= 1e-12


def test_w13_seminorm_shear_field(space8):
    v = space8.interpolate(lambda x, y: np.column_stack([y, np.zeros_like(x)]))
    # |eps| = (1/2)^(1/2) everywhere, so the cubed seminorm is 2^(-3/2)
    assert abs(space8.norm(v, "W13semi") ** 3 - 2 ** -1.5) <= 1e-12


def test_unknown_norm_kind(space8):
    with pytest.raises(ValueError):
        space8.norm(np.zeros(space8.n_velocity), "L5")


def test_norm_l2_equals_mass_quadratic_form(space8):
    rng = np.random.default_rng(11)
    for _ in range(10):
        u = rng.standard_normal(space8.n_velocity)
        uMu = u @ space8.M @ u
        assert abs(space8.norm(u, "L2") ** 2 - uMu) <= 1e-10 * uMu


def test_operator_signs_on_random_fields(space8):
    rng = np.random.default_rng(5)
    for _ in range(100):
        v = rng.standard_normal(space8.n_velocity)
        assert v @ space8.K_eps @ v >= 0.0
        assert v @ space8.M @ v > 0.0


def test_korn_constant_holds_for_fresh_batch(space8):
    # mesh-level constant: largest eigenvalue of (K_grad, K_eps) on the
    # boundary-zero subspace; then a fresh batch must satisfy the inequality
    c_k = space8.korn_constant()
    assert 0 < c_k <= 1.0 + 1e-10  # strain controls the gradient here
    I = space8.interior_vdofs
    rng = np.random.default_rng(17)
    for _ in range(100):
        v = np.zeros(space8.n_velocity)
        v[I] = rng.standard_normal(len(I))
        assert v @ space8.K_grad @ v <= c_k * (v @ space8.K_eps @ v) * (1 + 1e-10)
    # the constant comes from an eigensolve; cross-check it is actually
    # attained (within tolerance) by the generalized eigenproblem residual
    Kg = space8.K_grad.tocsr()[I][:, I]
    Ke = space8.K_eps.tocsr()[I][:, I].tocsc()
    val = float(eigsh(Kg, k=1, M=Ke, which="LA", return_eigenvectors=False)[0])
    assert abs(val - c_k) <= 1e-8 * c_k


def test_divergence_operator_on_linear_fields(space8):
    v = space8.interpolate(lambda x, y: np.column_stack([x, -y]))
    assert np.abs(space8.B @ v).max() <= 1e-13
    w = space8.interpolate(lambda x, y: np.column_stack([x, y]))
    # (q, div w) with q = 1 gives 2 |Omega|
    assert abs(space8.pressure_integral @ np.ones(space8.n_pressure) - 1.0) <= 1e-12
    assert abs((space8.B @ w).sum() - 2.0) <= 1e-10


def test_boundary_flux_vector(space8):
    w = space8.interpolate(lambda x, y: np.column_stack([x, y]))
    assert abs(space8.flux_vector @ w - 2.0) <= 1e-12
    v = space8.interpolate(lambda x, y: np.column_stack([x, -y]))
    assert abs(space8.flux_vector @ v) <= 1e-12


def test_strain_at_point(space8):
    from recirc.turbulence import strain

    v = space8.interpolate(lambda x, y: np.column_stack([y, np.zeros_like(x)]))
    E = strain(space8, v, (0.37, 0.61))
    assert np.allclose(E, [[0.0, 0.5], [0.5, 0.0]], atol=1e-12)
    rot = space8.interpolate(lambda x, y: np.column_stack([-y, x]))
    assert np.abs(strain(space8, rot, (0.4, 0.8))).max() <= 1e-12
    vx = space8.interpolate(lambda x, y: np.column_stack([x, -y]))
    assert np.allclose(strain(space8, vx, (0.21, 0.55)), np.diag([1.0, -1.0]), atol=1e-12)
