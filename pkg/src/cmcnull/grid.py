"""Periodic 3-torus lattice and tensor field substrate.

Everything downstream (slice geometry, elliptic solves, curvature
monitors) lives on a uniform periodic cube.  Fields are double-precision
numpy arrays; symmetric 2-tensors are stored with 6 components in the
order xx, xy, xz, yy, yz, zz.  Derivatives are 4th-order centered
stencils, interpolation is per-axis cubic Lagrange, and quadrature is
plain Riemann summation (spectrally accurate for smooth periodic
integrands).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SYM6_NAMES = ("xx", "xy", "xz", "yy", "yz", "zz")
# (row, col) of each packed component in the full 3x3 matrix
SYM6_IDX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
# packed index of full (i, j)
MAT_TO_SYM6 = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]])


class GridError(ValueError):
    """Bad field data or lattice parameters."""


@dataclass(frozen=True)
class Lattice:
    """Uniform periodic cube: n_pts points per axis, length box_len."""

    n_pts: int
    box_len: float = 1.0

    def __post_init__(self):
        if self.n_pts < 8 or self.n_pts % 2 != 0:
            raise GridError(f"n_pts must be even and >= 8, got {self.n_pts}")
        if not self.box_len > 0:
            raise GridError(f"box_len must be positive, got {self.box_len}")

    @property
    def spacing(self) -> float:
        return self.box_len / self.n_pts

    @property
    def shape(self) -> tuple:
        return (self.n_pts,) * 3

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.n_pts) * self.spacing

    def coords(self):
        """Meshgrid coordinate arrays (x, y, z), each of grid shape."""
        c = self.axis_coords()
        return np.meshgrid(c, c, c, indexing="ij")

    def cell_volume(self) -> float:
        return self.spacing**3


def _check_finite(data: np.ndarray, what: str):
    if not np.all(np.isfinite(data)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(data))[0])
        raise GridError(f"non-finite value in {what} at index {bad}")


@dataclass(frozen=True)
class ScalarField:
    lattice: Lattice
    data: np.ndarray  # (n, n, n)

    def __post_init__(self):
        if self.data.shape != self.lattice.shape:
            raise GridError(f"scalar data shape {self.data.shape} != {self.lattice.shape}")
        _check_finite(self.data, "ScalarField")


@dataclass(frozen=True)
class VectorField:
    lattice: Lattice
    data: np.ndarray  # (n, n, n, 3)

    def __post_init__(self):
        if self.data.shape != self.lattice.shape + (3,):
            raise GridError(f"vector data shape {self.data.shape} invalid")
        _check_finite(self.data, "VectorField")


@dataclass(frozen=True)
class SymTensor2Field:
    """Symmetric 2-tensor, packed storage (xx, xy, xz, yy, yz, zz)."""

    lattice: Lattice
    data: np.ndarray  # (n, n, n, 6)

    def __post_init__(self):
        if self.data.shape != self.lattice.shape + (6,):
            raise GridError(f"sym tensor data shape {self.data.shape} invalid")
        _check_finite(self.data, "SymTensor2Field")

    def mat(self) -> np.ndarray:
        """Full (n, n, n, 3, 3) view-copy."""
        return sym6_to_mat(self.data)


FIELD_RANKS = {ScalarField: 0, VectorField: 1, SymTensor2Field: 2}


def sym6_to_mat(sym: np.ndarray) -> np.ndarray:
    out = np.empty(sym.shape[:-1] + (3, 3), dtype=sym.dtype)
    for p, (i, j) in enumerate(SYM6_IDX):
        out[..., i, j] = sym[..., p]
        out[..., j, i] = sym[..., p]
    return out


def mat_to_sym6(mat: np.ndarray) -> np.ndarray:
    out = np.empty(mat.shape[:-2] + (6,), dtype=mat.dtype)
    for p, (i, j) in enumerate(SYM6_IDX):
        out[..., p] = mat[..., i, j]
    return out


def constant_scalar(lat: Lattice, value: float) -> ScalarField:
    return ScalarField(lat, np.full(lat.shape, float(value)))


def constant_sym6(lat: Lattice, diag_or_sym6) -> SymTensor2Field:
    v = np.asarray(diag_or_sym6, dtype=float)
    if v.shape == (3,):
        v = np.array([v[0], 0.0, 0.0, v[1], 0.0, v[2]])
    if v.shape != (6,):
        raise GridError("expected 3 diagonal values or 6 packed components")
    return SymTensor2Field(lat, np.broadcast_to(v, lat.shape + (6,)).copy())


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def fd_axis(data: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    """4th-order centered periodic derivative of a raw array along axis."""
    fp1 = np.roll(data, -1, axis=axis)
    fp2 = np.roll(data, -2, axis=axis)
    fm1 = np.roll(data, 1, axis=axis)
    fm2 = np.roll(data, 2, axis=axis)
    if order == 1:
        return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)
    if order == 2:
        return (-fp2 + 16.0 * fp1 - 30.0 * data + 16.0 * fm1 - fm2) / (12.0 * h**2)
    raise GridError(f"derivative order must be 1 or 2, got {order}")


def fd_derivative(f, axis: int, order: int = 1):
    """Centered 4th-order periodic derivative; returns a field of same rank."""
    if axis not in (0, 1, 2):
        raise GridError(f"axis must be 0..2, got {axis}")
    _check_finite(f.data, type(f).__name__)
    d = fd_axis(f.data, axis, f.lattice.spacing, order)
    return type(f)(f.lattice, d)


def grad_all(data: np.ndarray, h: float) -> np.ndarray:
    """Stack of the three first derivatives, leading axis = direction."""
    return np.stack([fd_axis(data, ax, h, 1) for ax in range(3)])


def second_derivs(data: np.ndarray, h: float) -> np.ndarray:
    """(3, 3, ...) array of d_i d_j applied to data.

    Diagonal entries use the direct 2nd-derivative stencil, off-diagonal
    entries compose two first-derivative stencils (commuting, so the
    result is symmetric by construction).
    """
    out = np.empty((3, 3) + data.shape, dtype=data.dtype)
    firsts = [fd_axis(data, ax, h, 1) for ax in range(3)]
    for i in range(3):
        out[i, i] = fd_axis(data, i, h, 2)
        for j in range(i + 1, 3):
            mixed = fd_axis(firsts[i], j, h, 1)
            out[i, j] = mixed
            out[j, i] = mixed
    return out


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def _lagrange_weights(xi: np.ndarray) -> np.ndarray:
    """Cubic Lagrange weights at offset xi in [0,1) for nodes (-1,0,1,2)."""
    w = np.empty(xi.shape + (4,))
    w[..., 0] = -xi * (xi - 1.0) * (xi - 2.0) / 6.0
    w[..., 1] = (xi + 1.0) * (xi - 1.0) * (xi - 2.0) / 2.0
    w[..., 2] = -(xi + 1.0) * xi * (xi - 2.0) / 2.0
    w[..., 3] = (xi + 1.0) * xi * (xi - 1.0) / 6.0
    return w


def interpolate_data(data: np.ndarray, lat: Lattice, points: np.ndarray) -> np.ndarray:
    """Cubic Lagrange interpolation of a raw grid array at (m, 3) points.

    Periodic wraparound; component axes of `data` beyond the first three
    are carried along.  Exactly reproduces grid values at nodes.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    h = lat.spacing
    n = lat.n_pts
    u = pts / h
    base = np.floor(u).astype(int)
    xi = u - base

    wx = _lagrange_weights(xi[:, 0])
    wy = _lagrange_weights(xi[:, 1])
    wz = _lagrange_weights(xi[:, 2])

    offs = np.array([-1, 0, 1, 2])
    ix = (base[:, 0, None] + offs) % n  # (m,4)
    iy = (base[:, 1, None] + offs) % n
    iz = (base[:, 2, None] + offs) % n

    # gather (m,4,4,4, comps...) then contract the three stencil axes
    cube = data[ix[:, :, None, None], iy[:, None, :, None], iz[:, None, None, :]]
    out = np.einsum("ma,mb,mc,mabc...->m...", wx, wy, wz, cube)
    return out


def interpolate(f, point) -> np.ndarray:
    """Interpolate a field at one point or an (m, 3) batch of points."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    vals = interpolate_data(f.data, f.lattice, pts)
    if np.asarray(point).ndim == 1:
        return vals[0]
    return vals


# ---------------------------------------------------------------------------
# quadrature and norms
# ---------------------------------------------------------------------------

def volume_integral(f: ScalarField, sqrt_det_g: ScalarField) -> float:
    """Integral of f over the slice with volume element sqrt(det g) h^3."""
    if f.lattice != sqrt_det_g.lattice:
        raise GridError("fields on different lattices")
    return float(np.sum(f.data * sqrt_det_g.data) * f.lattice.cell_volume())


def metric_pointwise(g: SymTensor2Field):
    """(g_mat, g_inv, sqrt_det_g) with positive definiteness enforced."""
    gm = g.mat()
    g11 = gm[..., 0, 0]
    det2 = gm[..., 0, 0] * gm[..., 1, 1] - gm[..., 0, 1] ** 2
    det3 = np.linalg.det(gm)
    ok = (g11 > 0) & (det2 > 0) & (det3 > 0)
    if not np.all(ok):
        bad = np.argwhere(~ok)[0]
        raise GridError(f"metric not positive definite at grid index {tuple(bad)}")
    return gm, np.linalg.inv(gm), np.sqrt(det3)


def pointwise_norm2(f, g_mat: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """|f|_g^2 at every point; all indices contracted through g^{-1}."""
    if isinstance(f, ScalarField):
        return f.data**2
    if isinstance(f, VectorField):
        return np.einsum("...ab,...a,...b->...", g_inv, f.data, f.data)
    if isinstance(f, SymTensor2Field):
        fm = f.mat()
        return np.einsum("...ia,...jb,...ij,...ab->...", g_inv, g_inv, fm, fm)
    raise GridError(f"unsupported field type {type(f)}")


def field_norm(f, g: SymTensor2Field, which: str = "L2") -> float:
    """L^p(Sigma) norm of |f|_g: which in {L1, L2, L4, L6, Linf}."""
    gm, ginv, sg = metric_pointwise(g)
    n2 = pointwise_norm2(f, gm, ginv)
    lat = f.lattice
    if which == "Linf":
        return float(np.sqrt(np.max(n2)))
    powers = {"L1": 0.5, "L2": 1.0, "L4": 2.0, "L6": 3.0}
    if which not in powers:
        raise GridError(f"unknown norm {which!r}")
    p = powers[which]
    integral = float(np.sum(n2**p * sg) * lat.cell_volume())
    return integral ** (1.0 / (2 * p))


# ---------------------------------------------------------------------------
# serialization: JSON header line + raw little-endian float64 payload
# ---------------------------------------------------------------------------

def save_field(f, path):
    header = {
        "n_pts": f.lattice.n_pts,
        "box_len": f.lattice.box_len,
        "rank": FIELD_RANKS[type(f)],
        "components": list(SYM6_NAMES) if isinstance(f, SymTensor2Field) else None,
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(f.data, dtype="<f8").tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    lat = Lattice(header["n_pts"], header["box_len"])
    rank = header["rank"]
    comps = {0: (), 1: (3,), 2: (6,)}[rank]
    data = np.frombuffer(payload, dtype="<f8").reshape(lat.shape + comps).copy()
    cls = {0: ScalarField, 1: VectorField, 2: SymTensor2Field}[rank]
    return cls(lat, data)
