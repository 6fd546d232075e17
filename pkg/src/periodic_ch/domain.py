"""Bulk/boundary discretizations and the coupled field type.

Both grids are vertex centred and the boundary nodes are bulk nodes, so the
trace is a row selection. Bulk stiffness ``K_b`` and surface stiffness ``K_s``
are assembled from edge conductances; the discrete Laplacian is then defined
through the normal derivative so that

    z^T W_b (-lap v) + (T z)^T W_s (dnu v) = z^T K_b v

holds identically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ConsistencyError

TRACE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CoupledField:
    """A pair (z, z_Gamma) of bulk and boundary nodal values."""

    bulk: np.ndarray
    surf: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bulk", np.asarray(self.bulk, dtype=float))
        object.__setattr__(self, "surf", np.asarray(self.surf, dtype=float))

    def __add__(self, other):
        if isinstance(other, CoupledField):
            return CoupledField(self.bulk + other.bulk, self.surf + other.surf)
        return CoupledField(self.bulk + other, self.surf + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, CoupledField):
            return CoupledField(self.bulk - other.bulk, self.surf - other.surf)
        return CoupledField(self.bulk - other, self.surf - other)

    def __neg__(self):
        return CoupledField(-self.bulk, -self.surf)

    def __mul__(self, a):
        return CoupledField(a * self.bulk, a * self.surf)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return CoupledField(self.bulk / a, self.surf / a)

    def map(self, f_bulk, f_surf=None):
        return CoupledField(f_bulk(self.bulk), (f_surf or f_bulk)(self.surf))

    def copy(self):
        return CoupledField(self.bulk.copy(), self.surf.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.bulk)) and np.all(np.isfinite(self.surf)))

    def allclose(self, other, atol=0.0, rtol=0.0) -> bool:
        return np.allclose(self.bulk, other.bulk, atol=atol, rtol=rtol) and np.allclose(
            self.surf, other.surf, atol=atol, rtol=rtol
        )


def _edge_laplacian(n, i, j, g):
    """Sum of g_e (e_i - e_j)(e_i - e_j)^T over edges."""
    i = np.asarray(i)
    j = np.asarray(j)
    g = np.asarray(g, dtype=float)
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([g, g, -g, -g])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class CoupledDomain:
    """Discretized bulk and boundary with quadrature and differential operators.

    Attributes
    ----------
    bulk_weights, surf_weights : ndarray
        Nodal quadrature weights; they sum to |Omega| and |Gamma|.
    K_b, K_s : sparse matrix
        Bulk and surface stiffness matrices (symmetric, constants in the kernel).
    T : sparse matrix
        Trace, selecting the boundary nodes of a bulk vector.
    N : sparse matrix
        Outward normal derivative, bulk vector to boundary values.
    """

    kind: str

    def __init__(self, kind, sizes, kappa1, kappa2, bulk_weights, surf_weights,
                 K_b, K_s, trace_idx, N, bulk_coords, surf_coords):
        if not (kappa1 > 0 and kappa2 > 0):
            raise ConfigError("kappa1 and kappa2 must be positive")
        self.kind = kind
        self.sizes = tuple(sizes)
        self.kappa1 = float(kappa1)
        self.kappa2 = float(kappa2)
        self.bulk_weights = np.asarray(bulk_weights, dtype=float)
        self.surf_weights = np.asarray(surf_weights, dtype=float)
        self.K_b = sp.csr_matrix(K_b)
        self.K_s = sp.csr_matrix(K_s)
        self.trace_idx = np.asarray(trace_idx)
        nb, ns = self.n_bulk, self.n_surf
        self.T = sp.csr_matrix((np.ones(ns), (np.arange(ns), self.trace_idx)), shape=(ns, nb))
        self.N = sp.csr_matrix(N)
        self.bulk_coords = np.asarray(bulk_coords, dtype=float)
        self.surf_coords = np.asarray(surf_coords, dtype=float)
        # discrete Laplacian, exact integration by parts by construction
        coupling = self.T.T @ sp.diags(self.surf_weights) @ self.N
        self.L_b = -sp.diags(1.0 / self.bulk_weights) @ (self.K_b - coupling)
        self.L_s = -sp.diags(1.0 / self.surf_weights) @ self.K_s

    # -- sizes and measures ---------------------------------------------------
    @property
    def n_bulk(self) -> int:
        return self.bulk_weights.size

    @property
    def n_surf(self) -> int:
        return self.surf_weights.size

    @property
    def vol_bulk(self) -> float:
        return float(self.bulk_weights.sum())

    @property
    def vol_surf(self) -> float:
        return float(self.surf_weights.sum())

    @property
    def vol_total(self) -> float:
        return self.vol_bulk + self.vol_surf

    # -- field helpers --------------------------------------------------------
    def zeros(self) -> CoupledField:
        return CoupledField(np.zeros(self.n_bulk), np.zeros(self.n_surf))

    def constant(self, c: float) -> CoupledField:
        return CoupledField(np.full(self.n_bulk, float(c)), np.full(self.n_surf, float(c)))

    def lift(self, bulk) -> CoupledField:
        """The V-field whose boundary part is the trace of ``bulk``."""
        bulk = np.asarray(bulk, dtype=float)
        return CoupledField(bulk, bulk[self.trace_idx])

    def from_function(self, fn) -> CoupledField:
        """Sample ``fn(coord1, coord2)`` at the nodes."""
        b = np.asarray(fn(self.bulk_coords[:, 0], self.bulk_coords[:, 1]), dtype=float)
        return self.lift(b * np.ones(self.n_bulk))

    def trace_mismatch(self, z: CoupledField) -> float:
        return float(np.max(np.abs(z.bulk[self.trace_idx] - z.surf), initial=0.0))

    def check_trace(self, z: CoupledField, tol: float = TRACE_TOL):
        scale = max(1.0, float(np.max(np.abs(z.bulk), initial=0.0)))
        gap = self.trace_mismatch(z)
        if gap > tol * scale:
            raise ConsistencyError(f"boundary values differ from the trace by {gap:.3e}")

    def integrate(self, z: CoupledField) -> float:
        return float(self.bulk_weights @ z.bulk + self.surf_weights @ z.surf)

    # -- operators ------------------------------------------------------------
    def trace(self, bulk):
        return np.asarray(bulk, dtype=float)[self.trace_idx]

    def normal_derivative(self, bulk):
        return self.N @ np.asarray(bulk, dtype=float)

    def laplacian(self, bulk):
        return self.L_b @ np.asarray(bulk, dtype=float)

    def laplace_beltrami(self, surf):
        return self.L_s @ np.asarray(surf, dtype=float)

    def apply_A(self, v: CoupledField) -> CoupledField:
        """(-k1 lap v, k1 dnu v - k2 lap_G v_G); (A v, z)_H equals a(v, z)."""
        self.check_trace(v)
        k1, k2 = self.kappa1, self.kappa2
        return CoupledField(
            -k1 * self.laplacian(v.bulk),
            k1 * self.normal_derivative(v.bulk) - k2 * self.laplace_beltrami(v.surf),
        )

    # -- matrices on V-fields (bulk vectors) ------------------------------------
    @property
    def stiffness(self) -> sp.csr_matrix:
        """Matrix of a(.,.) on bulk vectors."""
        return sp.csr_matrix(self.kappa1 * self.K_b + self.kappa2 * (self.T.T @ self.K_s @ self.T))

    @property
    def mass_V(self) -> np.ndarray:
        """Diagonal of the H inner product restricted to V-fields."""
        return self.bulk_weights + self.T.T @ self.surf_weights

    def __repr__(self):
        return f"CoupledDomain({self.kind}{self.sizes}, kappa1={self.kappa1}, kappa2={self.kappa2})"


def interval_1d(n: int, kappa1: float = 1.0, kappa2: float = 1.0) -> CoupledDomain:
    """Unit interval with n cells; the boundary is the two endpoints."""
    if n < 4:
        raise ConfigError("Interval1D needs n_bulk >= 4")
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1)
    w = np.full(n + 1, h)
    w[[0, -1]] = h / 2
    K_b = _edge_laplacian(n + 1, np.arange(n), np.arange(1, n + 1), np.full(n, 1.0 / h))
    # second-order one-sided outward derivatives
    c = np.array([3.0, -4.0, 1.0]) / (2 * h)
    N = sp.lil_matrix((2, n + 1))
    N[0, [0, 1, 2]] = c
    N[1, [n, n - 1, n - 2]] = c
    coords = np.column_stack([x, np.zeros_like(x)])
    dom = CoupledDomain(
        "Interval1D", (n,), kappa1, kappa2, w, np.ones(2), K_b, sp.csr_matrix((2, 2)),
        [0, n], N, coords, coords[[0, n]],
    )
    return dom


def disc_polar_2d(nr: int, nt: int, kappa1: float = 1.0, kappa2: float = 1.0) -> CoupledDomain:
    """Unit disc on a polar grid with a single origin node; the boundary is the unit circle.

    Node 0 is the origin and ring j (1..nr), angle k is node 1 + (j-1)*nt + k.
    """
    if nr < 3 or nt < 8:
        raise ConfigError("DiscPolar2D needs n_radial >= 3 and n_angular >= 8")
    dr = 1.0 / nr
    dth = 2 * math.pi / nt
    nb = 1 + nr * nt

    def node(j, k):
        return 1 + (j - 1) * nt + (k % nt)

    r = dr * np.arange(1, nr + 1)
    ks = np.arange(nt)

    w = np.empty(nb)
    w[0] = math.pi * (dr / 2) ** 2
    for j in range(1, nr):
        w[node(j, ks)] = r[j - 1] * dr * dth
    w[node(nr, ks)] = 0.5 * (1.0 - (1.0 - dr / 2) ** 2) * dth

    I, J, G = [], [], []
    # origin to first ring
    I.append(np.zeros(nt, dtype=int)); J.append(node(1, ks)); G.append(np.full(nt, dth / 2))
    for j in range(1, nr):
        I.append(node(j, ks)); J.append(node(j + 1, ks))
        G.append(np.full(nt, (r[j - 1] + dr / 2) * dth / dr))
    for j in range(1, nr + 1):
        width = dr if j < nr else dr / 2
        I.append(node(j, ks)); J.append(node(j, ks + 1))
        G.append(np.full(nt, width / (r[j - 1] * dth)))
    K_b = _edge_laplacian(nb, np.concatenate(I), np.concatenate(J), np.concatenate(G))

    ws = np.full(nt, dth)
    K_s = _edge_laplacian(nt, ks, (ks + 1) % nt, np.full(nt, 1.0 / dth))

    N = sp.lil_matrix((nt, nb))
    for k in ks:
        N[k, node(nr, k)] = 3.0 / (2 * dr)
        N[k, node(nr - 1, k)] = -4.0 / (2 * dr)
        N[k, node(nr - 2, k)] = 1.0 / (2 * dr)

    coords = np.zeros((nb, 2))
    for j in range(1, nr + 1):
        coords[node(j, ks), 0] = r[j - 1] * np.cos(ks * dth)
        coords[node(j, ks), 1] = r[j - 1] * np.sin(ks * dth)
    trace_idx = node(nr, ks)
    return CoupledDomain(
        "DiscPolar2D", (nr, nt), kappa1, kappa2, w, ws, K_b, K_s, trace_idx, N,
        coords, coords[trace_idx],
    )


def build_domain(kind: str, sizes, kappa1: float = 1.0, kappa2: float = 1.0) -> CoupledDomain:
    sizes = [int(s) for s in np.atleast_1d(sizes)]
    if kind == "Interval1D":
        if len(sizes) != 1:
            raise ConfigError("Interval1D takes one size")
        return interval_1d(sizes[0], kappa1, kappa2)
    if kind == "DiscPolar2D":
        if len(sizes) != 2:
            raise ConfigError("DiscPolar2D takes (n_radial, n_angular)")
        return disc_polar_2d(sizes[0], sizes[1], kappa1, kappa2)
    raise ConfigError(f"unknown domain kind {kind!r}")


# -- snapshot files ---------------------------------------------------------------

SNAPSHOT_HEADER = ("node_id", "region", "coord1", "coord2", "value")


def write_snapshot(path, dom: CoupledDomain, z: CoupledField):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_HEADER)
        for i, (c, val) in enumerate(zip(dom.bulk_coords, z.bulk)):
            w.writerow([i, "bulk", repr(float(c[0])), repr(float(c[1])), repr(float(val))])
        for i, (c, val) in enumerate(zip(dom.surf_coords, z.surf)):
            w.writerow([i, "surf", repr(float(c[0])), repr(float(c[1])), repr(float(val))])


def read_snapshot(path) -> CoupledField:
    bulk, surf = {}, {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            target = bulk if row["region"] == "bulk" else surf
            target[int(row["node_id"])] = float(row["value"])
    return CoupledField(
        np.array([bulk[i] for i in range(len(bulk))]),
        np.array([surf[i] for i in range(len(surf))]),
    )
