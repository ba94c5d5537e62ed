"""Structured direction grids on the sphere and angular derivatives.

Directions are parametrized Gauss-Legendre in cos(theta) times uniform
in phi, so smooth quadrature over the sphere of directions is spectrally
accurate and the poles are never sampled.  Angular derivatives use
5-point stencils: Fornberg weights on the nonuniform theta nodes with
antipodal ghost continuation across the poles (f(-theta, phi) =
f(theta, phi + pi)), and a periodic 4th-order stencil in phi.  Tensor
quantities are differentiated through their slice-coordinate components,
which are honest scalars on the sphere of directions.
"""

from __future__ import annotations

import numpy as np


def fornberg_weights(x0: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x0 on given nodes."""
    n = len(nodes)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


class DirectionGrid:
    """Gauss-Legendre x uniform direction grid with derivative stencils."""

    def __init__(self, n_theta: int, n_phi: int):
        if n_theta < 4 or n_phi < 8 or n_phi % 2 != 0:
            raise ValueError("need n_theta >= 4 and even n_phi >= 8")
        self.n_theta = n_theta
        self.n_phi = n_phi
        x, w = np.polynomial.legendre.leggauss(n_theta)
        # ascending theta (x = cos theta descending)
        self.theta = np.arccos(x[::-1])
        self.w_theta = w[::-1]
        self.phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        self.dphi = 2.0 * np.pi / n_phi
        self.weights = np.outer(self.w_theta, np.full(n_phi, self.dphi))

        st, ct = np.sin(self.theta)[:, None], np.cos(self.theta)[:, None]
        cp, sp = np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        self.omega = np.stack([st * cp, st * sp, ct * np.ones_like(cp)], axis=-1)
        self.e_theta = np.stack([ct * cp, ct * sp, -st * np.ones_like(cp)], axis=-1)
        self.e_phi = np.stack([-sp * np.ones_like(st), cp * np.ones_like(st),
                               np.zeros((n_theta, n_phi))], axis=-1)

        # extended theta nodes and 5-point Fornberg rows for d/dtheta
        th = self.theta
        self.ext_theta = np.concatenate([[-th[1], -th[0]], th,
                                         [2 * np.pi - th[-1], 2 * np.pi - th[-2]]])
        self._dtheta_w = np.stack([
            fornberg_weights(th[i], self.ext_theta[i:i + 5], 1)
            for i in range(n_theta)
        ])

    @property
    def n_dirs(self) -> int:
        return self.n_theta * self.n_phi

    def flat(self, arr2d: np.ndarray) -> np.ndarray:
        return arr2d.reshape((self.n_dirs,) + arr2d.shape[2:])

    def unflat(self, arr: np.ndarray) -> np.ndarray:
        return arr.reshape((self.n_theta, self.n_phi) + arr.shape[1:])

    def integrate(self, f: np.ndarray) -> float:
        """Quadrature over the sphere of a (n_theta, n_phi) sample."""
        return float(np.sum(self.weights * f))

    def _extend_theta(self, f: np.ndarray) -> np.ndarray:
        """Antipodal ghost continuation: rows at -theta and 2 pi - theta."""
        half = self.n_phi // 2
        flip = lambda row: np.roll(row, half, axis=0)
        rows = ([flip(f[1]), flip(f[0])] + [f[i] for i in range(self.n_theta)]
                + [flip(f[-1]), flip(f[-2])])
        return np.stack(rows)

    def dtheta(self, f: np.ndarray) -> np.ndarray:
        """d/dtheta of (n_theta, n_phi, ...) samples, 4th order."""
        fe = self._extend_theta(f)
        out = np.zeros_like(f)
        for i in range(self.n_theta):
            w = self._dtheta_w[i]
            sl = fe[i:i + 5]
            out[i] = np.tensordot(w, sl, axes=(0, 0))
        return out

    def dphi_deriv(self, f: np.ndarray) -> np.ndarray:
        """d/dphi, periodic 4th-order centered."""
        fp1 = np.roll(f, -1, axis=1)
        fp2 = np.roll(f, -2, axis=1)
        fm1 = np.roll(f, 1, axis=1)
        fm2 = np.roll(f, 2, axis=1)
        return (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12.0 * self.dphi)

    def angular_derivs(self, f: np.ndarray):
        return self.dtheta(f), self.dphi_deriv(f)


class SurfacePatch:
    """Embedded cross-section geometry of a cone at one slice time.

    Built from per-direction positions and the slice metric sampled
    there; provides the induced 2-metric in (theta, phi) coordinates,
    the area-element ratio, and first-derivative surface operators.
    """

    def __init__(self, grid: DirectionGrid, positions: np.ndarray, g3: np.ndarray):
        self.grid = grid
        self.x = positions  # (nt, np, 3)
        self.g3 = g3        # (nt, np, 3, 3)
        xt = grid.dtheta(positions)
        xp = grid.dphi_deriv(positions)
        self.basis = np.stack([xt, xp], axis=-2)  # (nt, np, 2(a), 3(i))
        self.gamma = np.einsum("...ai,...bj,...ij->...ab", self.basis, self.basis, g3)
        self.det_gamma = (self.gamma[..., 0, 0] * self.gamma[..., 1, 1]
                          - self.gamma[..., 0, 1] ** 2)
        self.sqrt_gamma = np.sqrt(np.maximum(self.det_gamma, 0.0))
        self.gamma_inv = np.linalg.inv(self.gamma)

    def v_t(self) -> np.ndarray:
        """Area-element ratio sqrt(gamma)/sqrt(round-sphere gamma)."""
        return self.sqrt_gamma / np.sin(self.grid.theta)[:, None]

    def grad_scalar_coords(self, f: np.ndarray) -> np.ndarray:
        """(d_theta f, d_phi f) stacked, shape (nt, np, 2)."""
        ft, fp = self.grid.angular_derivs(f)
        return np.stack([ft, fp], axis=-1)

    def grad_scalar_frame(self, f: np.ndarray, frame_coeff: np.ndarray) -> np.ndarray:
        """Frame components e_A(f) given e_A = frame_coeff[..,A,a] X_a."""
        df = self.grad_scalar_coords(f)
        return np.einsum("...Aa,...a->...A", frame_coeff, df)

    def frame_coefficients(self, eA: np.ndarray) -> np.ndarray:
        """Solve e_A = m_A^a X_a for tangent frame vectors (nt,np,2,3)."""
        proj = np.einsum("...Ai,...bj,...ij->...Ab", eA, self.basis, self.g3)
        return np.einsum("...Ab,...ba->...Aa", proj, self.gamma_inv)

    def grad_norm2_scalar(self, f: np.ndarray) -> np.ndarray:
        df = self.grad_scalar_coords(f)
        return np.einsum("...ab,...a,...b->...", self.gamma_inv, df, df)

    def div_tangent_form(self, v_amb: np.ndarray) -> np.ndarray:
        """Divergence of a tangent 1-form given ambient components (..,3)."""
        va = np.einsum("...ai,...i->...a", self.basis, v_amb)
        v_up = np.einsum("...ab,...b->...a", self.gamma_inv, va)
        flux_t = self.sqrt_gamma * v_up[..., 0]
        flux_p = self.sqrt_gamma * v_up[..., 1]
        dt = self.grid.dtheta(flux_t)
        dp = self.grid.dphi_deriv(flux_p)
        return (dt + dp) / self.sqrt_gamma

    def curl_tangent_form(self, v_amb: np.ndarray) -> np.ndarray:
        """(d_theta v_phi - d_phi v_theta)/sqrt(gamma)."""
        va = np.einsum("...ai,...i->...a", self.basis, v_amb)
        dt = self.grid.dtheta(va[..., 1])
        dp = self.grid.dphi_deriv(va[..., 0])
        return (dt - dp) / self.sqrt_gamma

    def frame_orientation(self, eA: np.ndarray, n_inward: np.ndarray) -> np.ndarray:
        """Sign relating frame epsilon^{12} to the (theta, phi) area form."""
        m = self.frame_coefficients(eA)
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        return np.sign(det)

    def covariant_surface_deriv(self, w: np.ndarray, gamma3: np.ndarray) -> np.ndarray:
        """nabla-slash_a W_ij for a symmetric slice 2-tensor on the patch.

        w: (nt, np, 3, 3) coordinate components; gamma3: slice Christoffels
        at the patch points (nt, np, 3, 3, 3).  Returns (nt, np, 2, 3, 3).
        """
        dw = np.stack(self.grid.angular_derivs(w), axis=-3)  # (..,2,3,3)
        corr1 = np.einsum("...lmi,...am,...lj->...aij", gamma3, self.basis, w)
        corr2 = np.einsum("...lmj,...am,...il->...aij", gamma3, self.basis, w)
        return dw - corr1 - corr2
