"""Inner products, mean, projection, the bilinear form and its duality map.

Fields in H are arbitrary pairs; fields in V are pairs whose boundary part is
the trace of the bulk part, represented internally by their bulk vector.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import CoupledDomain, CoupledField
from .errors import NumericFailure, PreconditionError

MEAN_TOL = 1e-12


class SpaceOps:
    """Function-space layer over a fixed domain.

    The constrained stiffness system used by ``duality_Finv`` is factored once
    at construction; the Poincare constant is computed lazily and cached.
    """

    def __init__(self, dom: CoupledDomain):
        self.dom = dom
        self.S = dom.stiffness
        self.M_V = dom.mass_V
        self.c = self.M_V.copy()  # integrals of V-fields: c @ v
        n = dom.n_bulk
        kkt = sp.bmat([[self.S, sp.csr_matrix(self.c[:, None])], [sp.csr_matrix(self.c[None, :]), None]])
        try:
            self._lu = spla.splu(sp.csc_matrix(kkt))
        except RuntimeError as exc:
            raise NumericFailure(f"constrained stiffness factorization failed: {exc}") from exc
        self._n = n
        self._cP = None

    # -- H structure ----------------------------------------------------------
    def inner_H(self, u: CoupledField, z: CoupledField) -> float:
        d = self.dom
        return float(u.bulk @ (d.bulk_weights * z.bulk) + u.surf @ (d.surf_weights * z.surf))

    def norm_H(self, z: CoupledField) -> float:
        return float(np.sqrt(max(self.inner_H(z, z), 0.0)))

    def mean(self, z: CoupledField) -> float:
        return self.dom.integrate(z) / self.dom.vol_total

    def project(self, z: CoupledField) -> CoupledField:
        return z - self.mean(z)

    def _check_mean_zero(self, z: CoupledField, what: str):
        m = self.mean(z)
        scale = max(1.0, float(np.max(np.abs(z.bulk), initial=0.0)), float(np.max(np.abs(z.surf), initial=0.0)))
        if abs(m) > MEAN_TOL * scale:
            raise PreconditionError(f"{what} must have zero mean, got m = {m:.3e}")

    # -- V structure ----------------------------------------------------------
    def bilinear_a(self, u: CoupledField, z: CoupledField) -> float:
        self.dom.check_trace(u)
        self.dom.check_trace(z)
        return float(u.bulk @ (self.S @ z.bulk))

    def norm_V0(self, z: CoupledField) -> float:
        return float(np.sqrt(max(self.bilinear_a(z, z), 0.0)))

    @property
    def gram_V(self) -> sp.csr_matrix:
        """Matrix of the full V inner product (L2 plus gradient parts) on bulk vectors."""
        d = self.dom
        return sp.csr_matrix(sp.diags(self.M_V) + d.K_b + d.T.T @ d.K_s @ d.T)

    def norm_V(self, z: CoupledField) -> float:
        self.dom.check_trace(z)
        return float(np.sqrt(max(z.bulk @ (self.gram_V @ z.bulk), 0.0)))

    def load(self, g: CoupledField) -> np.ndarray:
        """The functional z -> (g, z)_H on V-fields, as a bulk vector."""
        d = self.dom
        return d.bulk_weights * g.bulk + d.T.T @ (d.surf_weights * g.surf)

    # -- duality ---------------------------------------------------------------
    def duality_F(self, z: CoupledField) -> CoupledField:
        """H representative of F z, i.e. the pair A z."""
        self._check_mean_zero(z, "F argument")
        return self.dom.apply_A(z)

    def solve_Finv(self, rhs: np.ndarray) -> np.ndarray:
        """Mean-zero w with S w = rhs; ``rhs`` must annihilate constants."""
        sol = self._lu.solve(np.concatenate([rhs, [0.0]]))
        w = sol[: self._n]
        if not np.all(np.isfinite(w)):
            raise NumericFailure("F^{-1} solve returned non-finite values")
        return w

    def duality_Finv(self, g: CoupledField) -> CoupledField:
        """Mean-zero V-field w with a(w, z) = (g, z)_H for all z in V."""
        self._check_mean_zero(g, "F^{-1} argument")
        return self.dom.lift(self.solve_Finv(self.load(g)))

    def inner_V0_star(self, g: CoupledField, h: CoupledField) -> float:
        return self.inner_H(g, self.duality_Finv(h))

    def norm_V0_star(self, g: CoupledField) -> float:
        return float(np.sqrt(max(self.inner_V0_star(g, g), 0.0)))

    # -- Poincare-Wirtinger -----------------------------------------------------
    def mean_zero_basis(self) -> np.ndarray:
        """Orthonormal basis (Euclidean) of the bulk vectors with zero mean."""
        q, _ = np.linalg.qr(self.c[:, None], mode="complete")
        return q[:, 1:]

    def poincare_constant(self) -> float:
        """Smallest c_P with |z|_V^2 <= c_P |z|_V0^2 for all mean-zero z."""
        if self._cP is None:
            Q = self.mean_zero_basis()
            A = Q.T @ (self.S @ Q)
            B = Q.T @ (self.gram_V @ Q)
            try:
                lam = sla.eigh(B, A, eigvals_only=True)
            except (sla.LinAlgError, ValueError) as exc:
                raise NumericFailure(f"Poincare eigenproblem failed: {exc}") from exc
            self._cP = float(lam[-1])
        return self._cP

    def spectral_gap(self) -> float:
        """Smallest nonzero eigenvalue of a(.,.) relative to (.,.)_H on V-fields."""
        Q = self.mean_zero_basis()
        # H-orthogonal complement of constants is the c-orthogonal one
        A = Q.T @ (self.S @ Q)
        B = Q.T @ (self.M_V[:, None] * Q)
        return float(sla.eigh(A, B, eigvals_only=True)[0])
