"""Preconditioned conjugate gradients for the CMC lapse operator.

The operator -(1/sqrt g) d_i (sqrt g g^{ij} d_j u) + c u with c > 0 is
self-adjoint and positive definite in the sqrt(g)-weighted inner
product, because the centered difference matrices are antisymmetric on
a periodic grid.  CG runs in that inner product with a Jacobi
(approximate diagonal) preconditioner; reductions are plain numpy sums,
so reruns are bit-stable.
"""

from __future__ import annotations

import numpy as np

from .grid import fd_axis


class CGFailure(RuntimeError):
    def __init__(self, msg, residual_history):
        super().__init__(msg)
        self.residual_history = residual_history


class LapseOperator:
    """Divergence-form elliptic operator on a periodic lattice."""

    def __init__(self, lattice, g_inv, sqrt_g, coeff):
        self.lat = lattice
        self.h = lattice.spacing
        self.sqrt_g = sqrt_g
        self.coeff = coeff
        # flux coefficients sqrt(g) g^{ij}
        self.flux = sqrt_g[..., None, None] * g_inv

    def apply(self, u: np.ndarray) -> np.ndarray:
        h = self.h
        du = [fd_axis(u, ax, h, 1) for ax in range(3)]
        div = np.zeros_like(u)
        for i in range(3):
            flux_i = sum(self.flux[..., i, j] * du[j] for j in range(3))
            div += fd_axis(flux_i, i, h, 1)
        return -div / self.sqrt_g + self.coeff * u

    def jacobi_diag(self) -> np.ndarray:
        # diagonal of D_i(c D_i .) is -sum_m w_m^2 c(x+mh) ~ -(130/144) c / h^2
        gii = np.einsum("...ii->...", self.flux) / self.sqrt_g
        return self.coeff + (130.0 / 144.0) * gii / self.h**2

    def weighted_dot(self, u, v) -> float:
        return float(np.sum(u * v * self.sqrt_g))


def solve_cg(op: LapseOperator, rhs: np.ndarray, tol: float = 1e-10,
             max_iter: int = 20000, x0: np.ndarray | None = None):
    """CG in the weighted inner product; returns (solution, info dict)."""
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - op.apply(x)
    minv = 1.0 / op.jacobi_diag()
    z = minv * r
    p = z.copy()
    rz = op.weighted_dot(r, z)
    rhs_norm = np.sqrt(op.weighted_dot(rhs, rhs))
    if rhs_norm == 0.0:
        rhs_norm = 1.0
    history = [np.sqrt(op.weighted_dot(r, r)) / rhs_norm]
    for it in range(max_iter):
        if history[-1] <= tol:
            return x, {"iterations": it, "relative_residual": history[-1],
                       "history": history}
        ap = op.apply(p)
        alpha = rz / op.weighted_dot(p, ap)
        x += alpha * p
        r -= alpha * ap
        history.append(np.sqrt(op.weighted_dot(r, r)) / rhs_norm)
        z = minv * r
        rz_new = op.weighted_dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise CGFailure(
        f"CG did not reach tol={tol} in {max_iter} iterations "
        f"(last relative residual {history[-1]:.3e})",
        history,
    )
