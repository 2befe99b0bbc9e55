"""Mixed P2/P1 finite-element space on a tagged triangle mesh.

Velocity is continuous piecewise-quadratic (vector), pressure continuous
piecewise-linear; the pair is inf-sup stable. Velocity coefficient vectors
are component-blocked: u = [u_x over scalar DOFs, u_y over scalar DOFs],
scalar DOFs being vertices followed by edge midpoints. Pressure lives on
vertices, defined up to a constant (fixed by the zero-mean gauge).

Assembled operators:
    M      velocity mass                 (u, v)
    K_eps  strain stiffness              2 (eps(u), eps(v))
    K_grad gradient stiffness            (grad u, grad v)
    B      divergence                    (q, div u), pressure rows

Norm conventions (kind argument of `norm`):
    L2, L3, L4  : Lebesgue norms of |u|
    H1semi      : (int |grad u|^2)^(1/2)
    W13semi     : (int |eps(u)|^3)^(1/3), the strain-based convention
    L2boundary  : (int_bnd |u|^2)^(1/2)
"""

import numpy as np
import scipy.sparse as sp

from .errors import MeshError
from .quadrature import edge_rule, triangle_rule

NORM_KINDS = ("L2", "L3", "L4", "H1semi", "W13semi", "L2boundary")


def _p2_values(pts):
    """P2 shape functions at reference points pts (nq, 2) -> (nq, 6)."""
    x, y = pts[:, 0], pts[:, 1]
    l0 = 1.0 - x - y
    l1, l2 = x, y
    return np.column_stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l1 * l2,
            4 * l2 * l0,
            4 * l0 * l1,
        ]
    )


def _p2_grads(pts):
    """Reference gradients of P2 shape functions -> (nq, 6, 2)."""
    x, y = pts[:, 0], pts[:, 1]
    l0 = 1.0 - x - y
    l1, l2 = x, y
    g0 = np.array([-1.0, -1.0])
    g1 = np.array([1.0, 0.0])
    g2 = np.array([0.0, 1.0])
    nq = len(pts)
    out = np.empty((nq, 6, 2))
    out[:, 0] = np.outer(4 * l0 - 1, g0)
    out[:, 1] = np.outer(4 * l1 - 1, g1)
    out[:, 2] = np.outer(4 * l2 - 1, g2)
    out[:, 3] = 4 * (np.outer(l2, g1) + np.outer(l1, g2))
    out[:, 4] = 4 * (np.outer(l0, g2) + np.outer(l2, g0))
    out[:, 5] = 4 * (np.outer(l1, g0) + np.outer(l0, g1))
    return out


def _p1_values(pts):
    x, y = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - x - y, x, y])


def _edge_trace(s):
    """1D quadratic trace shape functions (v0, v1, mid) at s in [0,1]."""
    s = np.asarray(s, dtype=float)
    return np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])


class MixedSpace:
    """Taylor-Hood P2/P1 space with assembled operators and norm evaluators."""

    def __init__(self, mesh, quad_degree=6):
        self.mesh = mesh
        self.rule = triangle_rule(quad_degree)
        self.quad_degree = self.rule.degree
        self.edge_quad = edge_rule(7)

        areas = mesh.cell_areas()
        if np.any(areas < 1e-14):
            raise MeshError(f"degenerate cell, min area {areas.min():.3e}")
        self.areas = areas

        nv = mesh.num_vertices
        ne = len(mesh.edges)
        self.n_scalar = nv + ne
        self.n_velocity = 2 * self.n_scalar
        self.n_pressure = nv

        # cell -> scalar P2 DOFs (3 vertices, 3 opposite-edge midpoints)
        self.cell_dofs = np.hstack([mesh.cells, nv + mesh.cell_edges])

        # coordinates of scalar DOFs (vertices then edge midpoints)
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        self.dof_coords = np.vstack([mesh.vertices, mids])

        self._tabulate()
        self._geometry()
        self._boundary_dofs()
        self._assemble()
        self._assemble_boundary()
        self._factorized_mass = None

    # -- tabulation and geometry -------------------------------------------

    def _tabulate(self):
        pts = self.rule.points
        self.N = _p2_values(pts)          # (nq, 6)
        self.Nhat_grad = _p2_grads(pts)   # (nq, 6, 2)
        self.P1 = _p1_values(pts)         # (nq, 3)

    def _geometry(self):
        p = self.mesh.vertices[self.mesh.cells]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # (nt,2,2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJT = np.empty_like(J)
        invJT[:, 0, 0] = J[:, 1, 1]
        invJT[:, 0, 1] = -J[:, 1, 0]
        invJT[:, 1, 0] = -J[:, 0, 1]
        invJT[:, 1, 1] = J[:, 0, 0]
        invJT /= det[:, None, None]
        self.jac = J
        # physical P2 gradients per cell and quadrature point: (nt, nq, 6, 2)
        self.grad = np.einsum("cab,qlb->cqla", invJT, self.Nhat_grad)
        # physical quadrature points (nt, nq, 2) and weights (nt, nq)
        self.qpoints = p[:, None, 0, :] + np.einsum(
            "cab,qb->cqa", J, self.rule.points
        )
        self.qweights = self.areas[:, None] * self.rule.weights[None, :]

    def _boundary_dofs(self):
        nv = self.mesh.num_vertices
        edge_lookup = {tuple(e): i for i, e in enumerate(self.mesh.edges)}
        self.bnd_edge_dofs = []  # per boundary edge: (v0, v1, mid) scalar dofs
        bset = set()
        self.tag_sdofs = {}
        for b in self.mesh.boundary:
            v0, v1 = b.vertices
            eid = edge_lookup[(v0, v1)]
            dofs = (v0, v1, nv + eid)
            self.bnd_edge_dofs.append(dofs)
            bset.update(dofs)
            self.tag_sdofs.setdefault(b.tag, set()).update(dofs)
        self.boundary_sdofs = np.array(sorted(bset), dtype=np.int64)
        mask = np.zeros(self.n_scalar, dtype=bool)
        mask[self.boundary_sdofs] = True
        self.interior_sdofs = np.flatnonzero(~mask)
        self.boundary_vdofs = np.concatenate(
            [self.boundary_sdofs, self.n_scalar + self.boundary_sdofs]
        )
        self.interior_vdofs = np.concatenate(
            [self.interior_sdofs, self.n_scalar + self.interior_sdofs]
        )

    # -- assembly ------------------------------------------------------------

    def _coo(self, rows_l, cols_m, data, shape):
        return sp.coo_matrix(
            (data.ravel(), (rows_l.ravel(), cols_m.ravel())), shape=shape
        ).tocsr()

    def _assemble(self):
        w = self.rule.weights
        a = self.areas
        N, G, P1 = self.N, self.grad, self.P1
        dofs = self.cell_dofs
        ns, nu, npr = self.n_scalar, self.n_velocity, self.n_pressure

        rows = np.repeat(dofs, 6, axis=1)           # (nt, 36): l index slow
        cols = np.tile(dofs, (1, 6))                 # (nt, 36): m index fast

        # scalar mass: same reference matrix scaled by area
        Mref = np.einsum("q,ql,qm->lm", w, N, N)
        Ms_data = a[:, None, None] * Mref[None, :, :]
        Ms = self._coo(rows, cols, Ms_data, (ns, ns))

        # scalar stiffness (grad . grad)
        Ks_data = np.einsum("q,c,cqlb,cqmb->clm", w, a, G, G)
        Ks = self._coo(rows, cols, Ks_data, (ns, ns))

        self.Ms = Ms
        self.M = sp.block_diag([Ms, Ms]).tocsr()
        self.K_grad = sp.block_diag([Ks, Ks]).tocsr()

        # strain stiffness 2 (eps(u), eps(v)): component blocks
        gx = G[:, :, :, 0]
        gy = G[:, :, :, 1]
        A11 = np.einsum("q,c,cql,cqm->clm", w, a, gx, gx) * 2 + np.einsum(
            "q,c,cql,cqm->clm", w, a, gy, gy
        )
        A22 = np.einsum("q,c,cql,cqm->clm", w, a, gy, gy) * 2 + np.einsum(
            "q,c,cql,cqm->clm", w, a, gx, gx
        )
        A12 = np.einsum("q,c,cql,cqm->clm", w, a, gy, gx)
        A21 = np.einsum("q,c,cql,cqm->clm", w, a, gx, gy)
        Keps = (
            self._coo(rows, cols, A11, (nu, nu))
            + self._coo(rows, cols + ns, A12, (nu, nu))
            + self._coo(rows + ns, cols, A21, (nu, nu))
            + self._coo(rows + ns, cols + ns, A22, (nu, nu))
        )
        self.K_eps = Keps.tocsr()

        # divergence (q, div u): pressure rows, velocity columns
        pdofs = self.mesh.cells
        prow = np.repeat(pdofs, 6, axis=1)           # (nt, 18)
        vcol = np.tile(dofs, (1, 3))                 # (nt, 18)
        Bx = np.einsum("q,c,qi,cqj->cij", w, a, P1, gx)
        By = np.einsum("q,c,qi,cqj->cij", w, a, P1, gy)
        B = self._coo(prow, vcol, Bx, (npr, nu)) + self._coo(
            prow, vcol + ns, By, (npr, nu)
        )
        self.B = B.tocsr()

        # pressure mass (for pressure norms) and the zero-mean gauge vector
        prow_p = np.repeat(pdofs, 3, axis=1)
        pcol_p = np.tile(pdofs, (1, 3))
        Mp_ref = np.einsum("q,qi,qj->ij", w, P1, P1)
        Mp_data = a[:, None, None] * Mp_ref[None, :, :]
        self.Mp = self._coo(prow_p, pcol_p, Mp_data, (npr, npr))
        mvec = np.zeros(npr)
        np.add.at(mvec, pdofs.ravel(), np.repeat(a / 3.0, 3))
        self.pressure_integral = mvec

    def weighted_strain_stiffness(self, weight):
        """Assemble int 2 w(x) eps(u):eps(v) for quadrature-point weights (nt, nq).

        Same block structure as K_eps; used for Picard linearizations of the
        strain-dependent closure.
        """
        wq = self.qweights * weight
        G = self.grad
        gx = G[:, :, :, 0]
        gy = G[:, :, :, 1]
        dofs = self.cell_dofs
        ns, nu = self.n_scalar, self.n_velocity
        rows = np.repeat(dofs, 6, axis=1)
        cols = np.tile(dofs, (1, 6))
        wgx = wq[:, :, None] * gx
        xx = wgx.transpose(0, 2, 1) @ gx
        yy = (wq[:, :, None] * gy).transpose(0, 2, 1) @ gy
        xy = (wq[:, :, None] * gy).transpose(0, 2, 1) @ gx
        K = (
            self._coo(rows, cols, 2 * xx + yy, (nu, nu))
            + self._coo(rows, cols + ns, xy, (nu, nu))
            + self._coo(rows + ns, cols, np.swapaxes(xy, 1, 2), (nu, nu))
            + self._coo(rows + ns, cols + ns, 2 * yy + xx, (nu, nu))
        )
        return K.tocsr()

    def _assemble_boundary(self):
        qs = self.edge_quad.points
        qw = self.edge_quad.weights
        T = _edge_trace(qs)  # (nq1, 3)
        ns = self.n_scalar

        flux = np.zeros(self.n_velocity)
        tri_rows, tri_cols, tri_data = [], [], []
        shape_int = qw @ T  # (3,) integrals of trace shape functions on [0,1]
        Tmass = np.einsum("q,ql,qm->lm", qw, T, T)
        for b, dofs in zip(self.mesh.boundary, self.bnd_edge_dofs):
            h = b.length
            d = np.array(dofs)
            for comp in range(2):
                flux[comp * ns + d] += h * shape_int * b.normal[comp]
            tri_rows.append(np.repeat(d, 3))
            tri_cols.append(np.tile(d, 3))
            tri_data.append((h * Tmass).ravel())
        self.flux_vector = flux
        Mb = sp.coo_matrix(
            (np.concatenate(tri_data), (np.concatenate(tri_rows), np.concatenate(tri_cols))),
            shape=(ns, ns),
        ).tocsr()
        self.Mb_scalar = Mb

    # -- field evaluation ------------------------------------------------------

    def eval_values(self, u):
        """Velocity field values at all cell quadrature points -> (nt, nq, 2)."""
        ns = self.n_scalar
        out = np.empty((self.mesh.num_cells, len(self.rule), 2))
        for comp in range(2):
            Uc = u[comp * ns + self.cell_dofs]
            out[:, :, comp] = Uc @ self.N.T
        return out

    def eval_grads(self, u):
        """Velocity gradients at quadrature points -> (nt, nq, 2, 2), [a,b]=d u_a/d x_b."""
        ns = self.n_scalar
        nt, nq = self.mesh.num_cells, len(self.rule)
        # grad (nt, nq, 6, 2) -> (nt, 6, nq*2) so the dof contraction is a matmul
        G = self.grad.transpose(0, 2, 1, 3).reshape(nt, 6, nq * 2)
        out = np.empty((nt, nq, 2, 2))
        for comp in range(2):
            Uc = u[comp * ns + self.cell_dofs]
            out[:, :, comp, :] = (Uc[:, None, :] @ G).reshape(nt, nq, 2)
        return out

    def _scatter(self, contrib):
        """Accumulate per-cell DOF contributions (nt, 6, 2) into a velocity vector."""
        ns = self.n_scalar
        flat = self.cell_dofs.ravel()
        return np.concatenate(
            [
                np.bincount(flat, weights=contrib[:, :, comp].ravel(), minlength=ns)
                for comp in range(2)
            ]
        )

    def load_vector(self, fvals):
        """Assemble L_i = int f . phi_i from values fvals (nt, nq, 2)."""
        wf = self.qweights[:, :, None] * fvals
        contrib = wf.transpose(0, 2, 1) @ self.N  # (nt, 2, 6)
        return self._scatter(contrib.transpose(0, 2, 1))

    def stress_load_vector(self, Svals):
        """Assemble L_i = int S : grad phi_i from tensor values (nt, nq, 2, 2).

        For symmetric S this equals int S : eps(phi_i).
        """
        nt, nq = self.mesh.num_cells, len(self.rule)
        WS = self.qweights[:, :, None, None] * Svals
        A = WS.transpose(0, 2, 1, 3).reshape(nt, 2, nq * 2)
        Bm = self.grad.transpose(0, 1, 3, 2).reshape(nt, nq * 2, 6)
        contrib = A @ Bm  # (nt, 2, 6)
        return self._scatter(contrib.transpose(0, 2, 1))

    def integrate(self, gvals):
        """Integrate scalar quadrature-point values (nt, nq) over the domain."""
        return float(np.einsum("cq,cq->", self.qweights, gvals))

    # -- norms ------------------------------------------------------------------

    def norm(self, u, kind):
        """Norm of a velocity field; see module docstring for conventions."""
        if kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {kind!r}, expected one of {NORM_KINDS}")
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_velocity,):
            raise ValueError(
                f"field length {u.shape} does not match velocity space ({self.n_velocity},)"
            )
        if kind == "L2boundary":
            return self._boundary_l2(u)
        if kind in ("L2", "L3", "L4"):
            p = {"L2": 2, "L3": 3, "L4": 4}[kind]
            vals = self.eval_values(u)
            mag2 = np.einsum("cqa,cqa->cq", vals, vals)
            return self.integrate(mag2 ** (p / 2.0)) ** (1.0 / p)
        G = self.eval_grads(u)
        if kind == "H1semi":
            return np.sqrt(self.integrate(np.einsum("cqab,cqab->cq", G, G)))
        # W13semi
        E = 0.5 * (G + np.swapaxes(G, -1, -2))
        mag2 = np.einsum("cqab,cqab->cq", E, E)
        return self.integrate(mag2 ** 1.5) ** (1.0 / 3.0)

    def _boundary_l2(self, u):
        ns = self.n_scalar
        qs = self.edge_quad.points
        qw = self.edge_quad.weights
        T = _edge_trace(qs)
        total = 0.0
        for b, dofs in zip(self.mesh.boundary, self.bnd_edge_dofs):
            d = np.array(dofs)
            for comp in range(2):
                vals = T @ u[comp * ns + d]
                total += b.length * float(qw @ vals**2)
        return np.sqrt(total)

    def strain_samples(self, u):
        """Strain tensors eps(u) at all quadrature points -> (nt, nq, 2, 2)."""
        G = self.eval_grads(u)
        return 0.5 * (G + np.swapaxes(G, -1, -2))

    # -- interpolation and point evaluation --------------------------------------

    def interpolate(self, f):
        """Nodal interpolant of a callable f(x, y) -> (2,) or vectorized (n,2)."""
        xy = self.dof_coords
        vals = np.asarray(f(xy[:, 0], xy[:, 1]), dtype=float)
        if vals.shape == (2, len(xy)):
            vals = vals.T
        if vals.shape != (len(xy), 2):
            raise ValueError("interpoland must return one 2-vector per point")
        return np.concatenate([vals[:, 0], vals[:, 1]])

    def locate(self, point):
        """Index of a cell containing `point` (brute force; desk scale)."""
        p = np.asarray(point, dtype=float)
        v0 = self.mesh.vertices[self.mesh.cells[:, 0]]
        rhs = p[None, :] - v0
        J = self.jac
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        lam1 = (J[:, 1, 1] * rhs[:, 0] - J[:, 0, 1] * rhs[:, 1]) / det
        lam2 = (-J[:, 1, 0] * rhs[:, 0] + J[:, 0, 0] * rhs[:, 1]) / det
        ok = (lam1 >= -1e-12) & (lam2 >= -1e-12) & (lam1 + lam2 <= 1 + 1e-12)
        idx = np.flatnonzero(ok)
        if len(idx) == 0:
            raise ValueError(f"point {point} lies outside the mesh")
        return int(idx[0]), float(lam1[idx[0]]), float(lam2[idx[0]])

    def grad_at(self, u, point):
        """Velocity gradient at an arbitrary point -> (2, 2)."""
        c, l1, l2 = self.locate(point)
        ref = np.array([[l1, l2]])
        ghat = _p2_grads(ref)[0]  # (6, 2)
        p = self.mesh.vertices[self.mesh.cells[c]]
        J = np.stack([p[1] - p[0], p[2] - p[0]], axis=-1)
        invJT = np.linalg.inv(J).T
        g = ghat @ invJT.T
        ns = self.n_scalar
        out = np.empty((2, 2))
        for comp in range(2):
            out[comp] = u[comp * ns + self.cell_dofs[c]] @ g
        return out

    # -- misc ----------------------------------------------------------------------

    def mass_solve(self, rhs):
        """Solve M x = rhs (cached factorization)."""
        if self._factorized_mass is None:
            from scipy.sparse.linalg import factorized

            self._factorized_mass = factorized(self.M.tocsc())
        return self._factorized_mass(rhs)

    def korn_constant(self):
        """Mesh-level constant c_K with (grad v, grad v) <= c_K 2(eps v, eps v)
        for all boundary-zero fields: the largest generalized eigenvalue of
        (K_grad, K_eps) on the interior DOFs. Cached after the first call.
        """
        if not hasattr(self, "_korn"):
            from scipy.sparse.linalg import eigsh

            I = self.interior_vdofs
            Kg = self.K_grad.tocsr()[I][:, I]
            Ke = self.K_eps.tocsr()[I][:, I].tocsc()
            # the top of the pencil clusters at 1, so give Lanczos a generic
            # deterministic start and a roomy subspace
            start = np.random.default_rng(12345).standard_normal(len(I))
            val = eigsh(Kg, k=1, M=Ke, which="LA", return_eigenvectors=False,
                        v0=start, ncv=min(len(I), 60), maxiter=10000, tol=1e-10)
            self._korn = float(val[0])
        return self._korn

    def vertex_velocity(self, u):
        """Velocity at mesh vertices -> (nv, 2), for VTK output."""
        nv = self.mesh.num_vertices
        ns = self.n_scalar
        return np.column_stack([u[:nv], u[ns : ns + nv]])

    def tagged_scalar_dofs(self, tag):
        return np.array(sorted(self.tag_sdofs.get(tag, ())), dtype=np.int64)
