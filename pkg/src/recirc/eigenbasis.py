"""Discrete Stokes eigenbasis: divergence-free, boundary-zero, L2-orthonormal.

The generalized symmetric eigenproblem K_grad x = lambda M x is solved on
the discretely divergence-free boundary-zero subspace by keeping the
velocity-pressure saddle form and discarding pressure. One pressure DOF is
pinned to remove the constant-pressure nullspace (constants lie in the
kernel of the divergence transpose, so the constraint set is unchanged);
the pencil is then handled by shift-invert Lanczos with the singular
velocity-only mass, the standard route for constrained pencils.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import CapacityError, SolverError


class EigenBasis:
    """Stokes eigenpairs (lambda_n, xi_n), M-orthonormal velocity columns.

    Attributes
    ----------
    eigenvalues : (N,) ascending positive eigenvalues
    fields : (n_velocity, N) mode coefficient columns
    gram_residual : max |Xi^T M Xi - I|
    rayleigh_residuals : |x^T K_grad x / x^T M x - lambda| per mode
    """

    def __init__(self, space, eigenvalues, fields):
        self.space = space
        order = np.argsort(eigenvalues)
        self.eigenvalues = np.asarray(eigenvalues)[order]
        self.fields = np.asarray(fields)[:, order]
        self._orthonormalize()
        G = self.fields.T @ (space.M @ self.fields)
        self.gram_residual = float(np.abs(G - np.eye(self.size)).max())
        num = np.einsum("ik,ik->k", self.fields, space.K_grad @ self.fields)
        den = np.einsum("ik,ik->k", self.fields, space.M @ self.fields)
        self.rayleigh_residuals = np.abs(num / den - self.eigenvalues)

    def _orthonormalize(self):
        # modified Gram-Schmidt in the M inner product; ARPACK vectors are
        # already near-orthonormal, this tightens the Gram residual to roundoff
        M = self.space.M
        V = self.fields
        for j in range(V.shape[1]):
            Mv = M @ V[:, j]
            for i in range(j):
                V[:, j] -= (V[:, i] @ Mv) * V[:, i]
                Mv = M @ V[:, j]
            V[:, j] /= np.sqrt(V[:, j] @ Mv)
            if V[np.argmax(np.abs(V[:, j])), j] < 0:  # sign convention
                V[:, j] *= -1.0

    @property
    def size(self):
        return self.fields.shape[1]

    def expand(self, coeffs):
        """Velocity coefficient vector of sum_k c_k xi_k."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.size,):
            raise ValueError(
                f"coefficient length {coeffs.shape} does not match basis size {self.size}"
            )
        return self.fields @ coeffs

    def project(self, v):
        """M-orthogonal projection coefficients of a velocity field."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.space.n_velocity,):
            raise ValueError("field length does not match the velocity space")
        return self.fields.T @ (self.space.M @ v)

    def save(self, path):
        np.savez_compressed(
            path,
            eigenvalues=self.eigenvalues,
            fields=self.fields,
            fingerprint=np.frombuffer(
                self.space.mesh.fingerprint().encode(), dtype=np.uint8
            ),
        )

    @classmethod
    def load(cls, path, space):
        data = np.load(path)
        stored = bytes(data["fingerprint"]).decode()
        if stored != space.mesh.fingerprint():
            raise SolverError(
                "stored eigenbasis belongs to a different mesh (fingerprint mismatch)"
            )
        basis = cls.__new__(cls)
        basis.space = space
        basis.eigenvalues = data["eigenvalues"]
        basis.fields = data["fields"]
        G = basis.fields.T @ (space.M @ basis.fields)
        basis.gram_residual = float(np.abs(G - np.eye(basis.size)).max())
        num = np.einsum("ik,ik->k", basis.fields, space.K_grad @ basis.fields)
        den = np.einsum("ik,ik->k", basis.fields, space.M @ basis.fields)
        basis.rayleigh_residuals = np.abs(num / den - basis.eigenvalues)
        return basis


def subspace_dimension(space):
    """Dimension of the discretely divergence-free boundary-zero subspace."""
    return len(space.interior_vdofs) - (space.n_pressure - 1)


def solve_stokes_eigen(space, n_modes, tol=1e-9):
    """First n_modes Stokes eigenpairs on the constrained subspace."""
    cap = subspace_dimension(space)
    if n_modes < 1:
        raise ValueError(f"mode count must be >= 1, got {n_modes}")
    if n_modes > cap:
        raise CapacityError(
            f"requested {n_modes} modes but the constrained subspace has dimension {cap}"
        )
    I = space.interior_vdofs
    Kg = space.K_grad.tocsr()[I][:, I]
    M_II = space.M.tocsr()[I][:, I]
    B_I = space.B[:, I].tocsr()[1:]  # pin pressure DOF 0
    npr = B_I.shape[0]
    A = sp.bmat([[Kg, B_I.T], [B_I, None]], format="csc")
    Msad = sp.bmat(
        [[M_II, None], [None, sp.csr_matrix((npr, npr))]], format="csc"
    )
    # deterministic Lanczos start: reruns give the same rotation within
    # degenerate eigenvalue clusters, keeping outputs bit-reproducible
    start = np.sin(np.arange(1, A.shape[0] + 1, dtype=float))
    try:
        vals, vecs = eigsh(A, k=n_modes, M=Msad, sigma=0.0, which="LM", tol=tol,
                           v0=start)
    except ArpackNoConvergence as exc:
        raise SolverError(
            f"Stokes eigensolver did not converge: {len(exc.eigenvalues)} of "
            f"{n_modes} modes found"
        ) from exc
    fields = np.zeros((space.n_velocity, n_modes))
    fields[I] = vecs[: len(I)]
    basis = EigenBasis(space, vals, fields)
    if np.any(basis.eigenvalues <= 0):
        raise SolverError(
            f"nonpositive Stokes eigenvalue {basis.eigenvalues.min():.3e}"
        )
    return basis
