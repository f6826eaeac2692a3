"""Fields on a periodic box and the discrete operators acting on them.

A field is a numpy array whose first three axes are the grid axes; trailing
axes hold components (``(n1, n2, n3)`` scalar, ``(n1, n2, n3, 3)`` vector,
``(n1, n2, n3, 3, 3)`` matrix). Gradients append the derivative index last,
so ``grad(v)[..., i, j] = ∂_j v_i``.

Derivatives are diagonal in Fourier space. The spectral backend uses the
exact wave numbers (Nyquist mode dropped), the central backend the symbol
``sin(k h) / h`` of the second-order centred difference. Either way the
discrete derivative is skew-adjoint, which makes summation by parts exact.

Two-dimensional runs use a grid with a single cell along the third axis; all
vectors keep three components.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import oseen_frank as of
from . import tensor_kernel as tk
from .leslie import UNIT_TOL, check_unit

BACKENDS = ("spectral", "central")
_AXES = (0, 1, 2)


@dataclass(frozen=True)
class Grid:
    n: tuple
    L: tuple = (2 * np.pi, 2 * np.pi, 2 * np.pi)
    backend: str = "spectral"

    def __post_init__(self):
        n = tuple(int(x) for x in (self.n if np.ndim(self.n) else (self.n,) * 3))
        L = tuple(float(x) for x in (self.L if np.ndim(self.L) else (self.L,) * 3))
        if len(n) == 2:
            n = n + (1,)
        if len(n) != 3 or len(L) != 3:
            raise of.ValidationError(f"grid needs three axes, got n={n}, L={L}")
        if any(m != 1 and m < 4 for m in n) or n[0] < 4 or n[1] < 4:
            raise of.ValidationError(f"need at least 4 cells per active axis, got {n}")
        if min(L) <= 0:
            raise of.ValidationError(f"box lengths must be positive, got {L}")
        if self.backend not in BACKENDS:
            raise of.ValidationError(f"unknown backend {self.backend!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", L)

    @classmethod
    def planar(cls, n, L=2 * np.pi, backend="spectral"):
        """Grid for fields depending on (x1, x2) only."""
        return cls((n, n, 1), (L, L, L), backend)

    @property
    def shape(self):
        return self.n

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.L, self.n))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.L))

    @property
    def h_min(self):
        return min(h for h, n in zip(self.spacing, self.n) if n > 1)

    def with_backend(self, backend):
        return Grid(self.n, self.L, backend)

    def coordinates(self):
        """Cell-point coordinates, each of grid shape."""
        axes = [np.arange(n) * (L / n) for n, L in zip(self.n, self.L)]
        return np.meshgrid(*axes, indexing="ij")

    @cached_property
    def wavenumbers(self):
        """Exact wave numbers per axis (broadcastable to the grid)."""
        ks = []
        for a, (n, L) in enumerate(zip(self.n, self.L)):
            k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
            shape = [1, 1, 1]
            shape[a] = n
            ks.append(k.reshape(shape))
        return ks

    @cached_property
    def symbols(self):
        """Fourier symbols κ of the first-derivative operator, per axis."""
        out = []
        for a, (k, n) in enumerate(zip(self.wavenumbers, self.n)):
            if self.backend == "spectral":
                s = k.copy()
                if n % 2 == 0:
                    s.flat[n // 2] = 0.0
            else:
                h = self.L[a] / n
                s = np.sin(k * h) / h
            out.append(s)
        return out

    @cached_property
    def symbol_sq(self):
        return sum(s**2 for s in self.symbols)

    # -- transforms --------------------------------------------------------

    def _fft(self, f):
        return np.fft.fftn(f, axes=_AXES)

    def _ifft(self, F):
        return np.real(np.fft.ifftn(F, axes=_AXES))

    def _bcast(self, s, ncomp_dims):
        return s.reshape(s.shape + (1,) * ncomp_dims)

    # -- differential operators -------------------------------------------

    def grad(self, f):
        f = np.asarray(f, dtype=float)
        extra = f.ndim - 3
        F = self._fft(f)
        parts = [self._ifft(1j * self._bcast(s, extra) * F) for s in self.symbols]
        return np.stack(parts, axis=-1)

    def div(self, F):
        """Divergence over the last index: vector -> scalar, matrix -> vector."""
        F = np.asarray(F, dtype=float)
        Fh = self._fft(F)
        extra = F.ndim - 4
        acc = 0
        for a, s in enumerate(self.symbols):
            acc = acc + 1j * self._bcast(s, extra) * Fh[..., a]
        return self._ifft(acc)

    def curl(self, v):
        # curl_i = Υ_ijk ∂_j v_k
        return np.einsum("ijk,...kj->...i", tk.LEVI_CIVITA, self.grad(v))

    def laplacian(self, f):
        return self.div(self.grad(f))

    def solve_helmholtz(self, f, coeff):
        """Solve ``(1 - coeff Δ) u = f`` with the backend's Laplacian."""
        f = np.asarray(f, dtype=float)
        extra = f.ndim - 3
        denom = self._bcast(1.0 + coeff * self.symbol_sq, extra)
        return self._ifft(self._fft(f) / denom)

    def helmholtz(self, v):
        """Split ``v = P v + ∇φ``; returns ``(P v, φ)``."""
        V = self._fft(v)
        k2 = self.symbol_sq
        safe = np.where(k2 > 0, k2, 1.0)
        kv = sum(s * V[..., a] for a, s in enumerate(self.symbols))
        coef = np.where(k2 > 0, kv / safe, 0.0)
        PV = V - np.stack([s * coef for s in self.symbols], axis=-1)
        phi_hat = -1j * coef
        return self._ifft(PV), self._ifft(phi_hat)

    def project_divfree(self, v):
        """Leray projection onto discretely divergence-free fields (mean kept)."""
        return self.helmholtz(v)[0]

    # -- quadrature and norms ---------------------------------------------

    def integrate(self, f):
        return float(np.sum(f) * self.cell_volume)

    def inner(self, f, g):
        return self.integrate(np.asarray(f) * np.asarray(g))

    def pointwise_norm(self, f):
        f = np.asarray(f, dtype=float)
        if f.ndim == 3:
            return np.abs(f)
        return np.sqrt(np.sum(f**2, axis=tuple(range(3, f.ndim))))

    def lp(self, f, p):
        a = self.pointwise_norm(f)
        if np.isinf(p):
            return float(np.max(a))
        return self.integrate(a**p) ** (1.0 / p)

    def l2(self, f):
        return self.lp(f, 2)

    def l6(self, f):
        return self.lp(f, 6)

    def linf(self, f):
        return self.lp(f, np.inf)

    def h1_seminorm(self, f):
        return self.l2(self.grad(f))

    def sobolev(self, f, order, p):
        """``W^{order,p}`` norm, ``(Σ_{|α|≤order} ||∂^α f||_p^p)^{1/p}``."""
        terms = [f]
        g = f
        for _ in range(order):
            g = self.grad(g)
            terms.append(g)
        if np.isinf(p):
            return max(self.linf(t) for t in terms)
        return sum(self.lp(t, p) ** p for t in terms) ** (1.0 / p)


# -- field constructors -------------------------------------------------------

def random_field(grid: Grid, rng, ncomp=3, kmax=3, amplitude=1.0):
    """Smooth random periodic field containing wave numbers up to ``kmax``."""
    shape = grid.n + ((ncomp,) if ncomp else ())
    F = np.zeros(shape, dtype=complex)
    mask = np.ones(grid.n, dtype=bool)
    for k, L in zip(grid.wavenumbers, grid.L):
        mask &= np.abs(k * L / (2 * np.pi)) <= kmax
    noise = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    F[mask] = noise[mask]
    f = np.real(np.fft.ifftn(F, axes=_AXES))
    scale = np.max(np.abs(f))
    return amplitude * f / scale if scale > 0 else f


def normalize(d):
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def random_director(grid: Grid, rng, kmax=2, amplitude=0.5, base=(0.0, 0.0, 1.0)):
    """Unit field: normalized ``base + amplitude * smooth noise``."""
    return normalize(np.asarray(base, dtype=float) + random_field(grid, rng, 3, kmax, amplitude))


def check_director(d, tol=UNIT_TOL):
    check_unit(d, tol)


# -- Oseen-Frank functional and its variational derivative ---------------------

def frank_energy_density(grid: Grid, d, et: of.ElasticTensors):
    return of.energy_density(d, grid.grad(d), et)


def frank_energy(grid: Grid, d, et: of.ElasticTensors):
    """Discrete free energy ``Σ vol · F(d, ∇d)``."""
    return grid.integrate(frank_energy_density(grid, d, et))


def variational_q(grid: Grid, d, et: of.ElasticTensors, check=True):
    """``q = F_h(d, ∇d) - div F_S(d, ∇d)``.

    With the tensor form of F_S this is ``-Δ_Λ d - div(d·Θ⋮(∇d⊗d)) +
    ∇d:Θ⋮(∇d⊗d)``; it is the exact gradient of :func:`frank_energy` with
    respect to the nodal values divided by the cell volume.
    """
    if check:
        check_unit(d)
    S = grid.grad(d)
    return of.F_h_tensor(d, S, et) - grid.div(of.F_S_tensor(d, S, et))


def variational_q_expanded(grid: Grid, d, et: of.ElasticTensors):
    """q assembled term by term from div, curl and the k1..k5 groups."""
    k1, k2, k3, k4, k5 = et.k
    S = grid.grad(d)
    W = tk.skw(S)
    div_d = tk.tr(S)
    curl_d = grid.curl(d)
    d_curl = tk.dot(d, curl_d)
    dd = tk.dot(d, d)
    q = (
        -k1 * grid.grad(div_d)
        + k2 * grid.curl(curl_d)
        - k3 * grid.grad(div_d * dd)
        - k4 * grid.div(tk.cross_matrix(d) * d_curl[..., None, None])
        - 4 * k5 * grid.div(tk.skw(tk.outer(tk.matvec(W, d), d)))
        + k3 * (div_d**2)[..., None] * d
        + k4 * d_curl[..., None] * curl_d
        + 4 * k5 * tk.matvec(tk.matmul(np.swapaxes(W, -1, -2), W), d)
    )
    return q


# -- snapshot files -------------------------------------------------------------

SNAPSHOT_MAGIC = "nematic-snapshot v1"


def write_snapshot(path, grid: Grid, name, t, data):
    """Plain-text snapshot: ``#`` header lines then one row per cell.

    Cells are in C order (first grid axis slowest); each row holds the
    field components in C order, printed with 17 significant digits.
    """
    data = np.asarray(data, dtype=float)
    comp_shape = data.shape[3:]
    header = "\n".join(
        [
            SNAPSHOT_MAGIC,
            "shape = " + " ".join(str(x) for x in grid.n),
            "L = " + " ".join(repr(x) for x in grid.L),
            f"backend = {grid.backend}",
            f"field = {name}",
            f"time = {t!r}",
            "components = " + " ".join(str(x) for x in comp_shape),
        ]
    )
    ncomp = int(np.prod(comp_shape)) if comp_shape else 1
    np.savetxt(path, data.reshape(-1, ncomp), fmt="%.17g", header=header)


def read_snapshot(path):
    meta = {}
    with open(path) as fh:
        first = fh.readline()
        if SNAPSHOT_MAGIC not in first:
            raise ValueError(f"{path}: not a snapshot file")
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
    grid = Grid(
        tuple(int(x) for x in meta["shape"].split()),
        tuple(float(x) for x in meta["L"].split()),
        meta.get("backend", "spectral"),
    )
    comp = tuple(int(x) for x in meta["components"].split())
    data = np.loadtxt(path, ndmin=2).reshape(grid.n + comp)
    return grid, meta["field"], float(meta["time"]), data
