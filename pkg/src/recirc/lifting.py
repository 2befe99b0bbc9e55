"""Divergence-free trace lifting by steady Stokes solves.

For each pump trace psi_k, solve the homogeneous Stokes system with the
symmetric-gradient form and boundary data psi_k imposed strongly:

    2 nu (eps(zeta), eps(eta)) - (p, div eta) = 0   for interior test eta,
    (q, div zeta) = 0, zeta = psi_k on the boundary, mean(p) = 0.

The symmetric-gradient form makes the lifted fields orthogonal to every
discretely divergence-free boundary-zero field in the 2 nu (eps, eps) inner
product, which is what removes the viscous lifting term from the reduced
equations. The time-dependent lift is the schedule-weighted combination
zeta_g(t) = sum_k g_k(t) zeta_k.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import CompatibilityError, SolverError


class LiftingBasis:
    """Per-pump Stokes lifts: velocity fields, pressures, solve residuals."""

    def __init__(self, space, nu, zetas, pressures, residuals):
        self.space = space
        self.nu = nu
        self.zetas = np.asarray(zetas)          # (K, n_velocity)
        self.pressures = np.asarray(pressures)  # (K, n_pressure)
        self.residuals = np.asarray(residuals)
        # quadrature-point tabulations for fast combination in the rhs path
        self.vals = np.stack([space.eval_values(z) for z in self.zetas]) \
            if len(self.zetas) else np.zeros((0, space.mesh.num_cells, len(space.rule), 2))
        self.grads = np.stack([space.eval_grads(z) for z in self.zetas]) \
            if len(self.zetas) else np.zeros((0, space.mesh.num_cells, len(space.rule), 2, 2))

    def __len__(self):
        return len(self.zetas)

    def combine(self, weights):
        """Coefficient-level combination sum_k w_k zeta_k."""
        if len(self) == 0:
            return np.zeros(self.space.n_velocity)
        return weights @ self.zetas

    def combine_qpt(self, weights):
        """(values, gradients) of sum_k w_k zeta_k at quadrature points."""
        if len(self) == 0:
            nt, nq = self.space.mesh.num_cells, len(self.space.rule)
            return np.zeros((nt, nq, 2)), np.zeros((nt, nq, 2, 2))
        v = np.einsum("k,kcqa->cqa", weights, self.vals)
        g = np.einsum("k,kcqab->cqab", weights, self.grads)
        return v, g


def _saddle_factorization(space, nu):
    """LU of the bordered Stokes saddle matrix on interior velocity DOFs."""
    I = space.interior_vdofs
    A = (nu * space.K_eps).tocsr()
    A_II = A[I][:, I]
    B_I = space.B[:, I]
    m = space.pressure_integral
    npr = space.n_pressure
    Z = sp.csr_matrix((npr, npr))
    sys = sp.bmat(
        [
            [A_II, B_I.T, None],
            [B_I, Z, m[:, None]],
            [None, m[None, :], None],
        ],
        format="csc",
    )
    try:
        return splu(sys)
    except RuntimeError as exc:
        raise SolverError(f"Stokes saddle factorization failed: {exc}") from exc


def solve_stokes_lift(space, psi, nu, lu=None):
    """Solve the Stokes lift for one trace field; returns (zeta, p, residual).

    Raises CompatibilityError if the trace has net discrete flux above 1e-8.
    """
    net = float(space.flux_vector @ psi)
    scale = max(1.0, float(np.abs(psi).max()))
    if abs(net) > 1e-8 * scale:
        raise CompatibilityError(
            f"trace field has net boundary flux {net:.3e}; Stokes lift unsolvable"
        )
    I = space.interior_vdofs
    Bd = space.boundary_vdofs
    A = (nu * space.K_eps).tocsr()
    psi_B = psi[Bd]
    rhs_mom = -(A[I][:, Bd] @ psi_B)
    rhs_div = -(space.B[:, Bd] @ psi_B)
    rhs = np.concatenate([rhs_mom, rhs_div, [0.0]])
    if lu is None:
        lu = _saddle_factorization(space, nu)
    sol = lu.solve(rhs)
    nI = len(I)
    zeta = np.zeros(space.n_velocity)
    zeta[I] = sol[:nI]
    zeta[Bd] = psi_B
    p = sol[nI : nI + space.n_pressure]
    p = p - (space.pressure_integral @ p) / space.pressure_integral.sum()

    res_mom = (A @ zeta + space.B.T @ p)[I]
    res_div = space.B @ zeta
    residual = float(np.sqrt(res_mom @ res_mom + res_div @ res_div))
    if not np.isfinite(residual) or residual > 1e-6 * max(1.0, abs(psi_B).max()):
        raise SolverError(f"Stokes lift residual {residual:.3e} out of tolerance")
    return zeta, p, residual


def build_lifting(space, pumps, nu):
    """Lift every pump trace of a PumpSet; one factorization, K solves."""
    lu = _saddle_factorization(space, nu) if len(pumps) else None
    zetas, pressures, residuals = [], [], []
    for pump in pumps.pumps:
        z, p, r = solve_stokes_lift(space, pump.psi, nu, lu=lu)
        zetas.append(z)
        pressures.append(p)
        residuals.append(r)
    return LiftingBasis(space, nu, zetas, pressures, residuals)


def lift_at(lb, pumps, t):
    """(zeta_g(t), d zeta_g/dt (t)) as velocity coefficient vectors."""
    g, gdot = pumps.rates(t)
    return lb.combine(g), lb.combine(gdot)


def convective_qpt(vals, grads):
    """(grad u) u at quadrature points from (values, gradients)."""
    return np.einsum("cqab,cqb->cqa", grads, vals)


def compute_Hg_load(lb, pumps, source, t):
    """Dual vector L_i = (H_g(t), phi_i) with H_g = F - d zeta_g/dt - grad zeta_g zeta_g."""
    space = lb.space
    L = np.zeros(space.n_velocity)
    if source is not None:
        xy = space.qpoints
        F = source(xy[..., 0].ravel(), xy[..., 1].ravel(), t)
        L += space.load_vector(np.asarray(F).reshape(xy.shape))
    if len(pumps):
        g, gdot = pumps.rates(t)
        L -= space.M @ lb.combine(gdot)
        v, G = lb.combine_qpt(g)
        L -= space.load_vector(convective_qpt(v, G))
    return L


def compute_Hg(lb, pumps, source, t):
    """H_g(t) as an L2-representable velocity field (Riesz representative)."""
    return lb.space.mass_solve(compute_Hg_load(lb, pumps, source, t))
