"""Oseen-Frank elastic energy, its partial derivatives and the elastic tensors.

The energy density is written as a function ``F(h, S)`` of a vector ``h``
(standing for the director) and a matrix ``S`` (standing for its gradient,
``S_ij = ∂_j d_i``). Three equivalent evaluations are provided:

* ``energy_density_K``: the classical splay/twist/bend form with K1, K2, K3
  (equal to the others only for ``|h| = 1``),
* ``energy_density_k``: the reformulation with k1..k5 in terms of div and curl,
* ``energy_density_tensor``: ``½ (S:Λ:S + (S⊗h)⋮Θ⋮(S⊗h))``.

Λ and Θ are applied through closed Kronecker-delta formulas; dense arrays are
built only on request (for cross-checks).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import tensor_kernel as tk


class ValidationError(ValueError):
    """Raised for inadmissible physical parameters or field data."""


def derive_k(K1, K2, K3):
    """Map Oseen-Frank moduli to the constants k1..k5 of the unit-norm reformulation."""
    if min(K1, K2, K3) <= 0:
        raise ValidationError(f"Frank moduli must be positive, got {(K1, K2, K3)}")
    k1 = k3 = K1 / 2
    k2 = min(K2, K3) / 2
    return (k1, k2, k3, K2 - k2, K3 - k2)


# -- dense tensors (oracle path) ---------------------------------------------

def lambda_dense(k1, k2):
    d = tk.EYE
    return k1 * np.einsum("ij,kl->ijkl", d, d) + k2 * (
        np.einsum("ik,jl->ijkl", d, d) - np.einsum("il,jk->ijkl", d, d)
    )


def lambda_blocks_dense():
    """The four order-4 tensors expressing |∇d|², (div d)², tr(∇d²) and |curl d|²."""
    d = tk.EYE
    L0 = np.einsum("ik,jl->ijkl", d, d)
    L1 = np.einsum("ij,kl->ijkl", d, d)
    L2 = np.einsum("il,jk->ijkl", d, d)
    return {"identity": L0, "divergence": L1, "trace_square": L2, "curl": L0 - L2}


def theta_blocks_dense():
    """Order-6 blocks, indexed ``[i, j, k, l, m, n]``.

    ``splay`` carries k3, ``twist`` (the Levi-Civita product) carries k4 and
    ``bend`` carries k5. ``full`` and ``curl`` are the two remaining
    decompositions (|∇d|²|d|² and |curl d|²|d|²).
    """
    d = tk.EYE
    e = lambda spec: np.einsum(spec, d, d, d)  # noqa: E731
    splay = e("ij,lm,kn->ijklmn")
    bend = (
        e("il,mn,jk->ijklmn")
        - e("mi,ln,jk->ijklmn")
        - e("lj,mn,ik->ijklmn")
        + e("jm,ln,ik->ijklmn")
    )
    twist = (
        e("kn,jm,il->ijklmn")
        + e("km,jl,in->ijklmn")
        + e("kl,jn,im->ijklmn")
        - e("kn,jl,im->ijklmn")
        - e("km,jn,il->ijklmn")
        - e("kl,jm,in->ijklmn")
    )
    full = e("il,jm,kn->ijklmn")
    curl = np.einsum("kn,il,jm->ijklmn", d, d, d) - np.einsum("kn,im,jl->ijklmn", d, d, d)
    return {"splay": splay, "twist": twist, "bend": bend, "full": full, "curl": curl}


def theta_dense(k3, k4, k5, blocks=None):
    b = theta_blocks_dense() if blocks is None else blocks
    return k3 * b["splay"] + k4 * b["twist"] + k5 * b["bend"]


# -- closed forms (production path) ------------------------------------------

def lambda_apply(k1, k2, A):
    """``Λ:A = k1 tr(A) I + k2 (A - Aᵀ)``."""
    return k1 * tk.tr(A)[..., None, None] * tk.EYE + k2 * (A - np.swapaxes(A, -1, -2))


def theta_apply(k3, k4, k5, G):
    """``Θ⋮Γ`` for an arbitrary third-order Γ (indices i, j, k)."""
    G = np.asarray(G, dtype=float)
    out = np.zeros_like(G)
    if k3:
        # δ_ij Σ_l Γ_llk
        out += k3 * tk.EYE[..., :, :, None] * np.einsum("...llk->...k", G)[..., None, None, :]
    if k4:
        c = np.einsum("nml,...lmn->...", tk.LEVI_CIVITA, G)
        out += k4 * c[..., None, None, None] * np.transpose(tk.LEVI_CIVITA, (2, 1, 0))
    if k5:
        a = np.einsum("...imm->...i", G) - np.einsum("...lil->...i", G)
        out += k5 * (
            np.einsum("...i,jk->...ijk", a, tk.EYE) - np.einsum("...j,ik->...ijk", a, tk.EYE)
        )
    return out


@dataclass(frozen=True)
class ElasticTensors:
    """Closed-form Λ (k1, k2) and Θ (k3, k4, k5).

    k1 and k2 must be positive for ellipticity; zero values are accepted so
    that single blocks can be isolated in tests.
    """

    k1: float
    k2: float
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0

    def __post_init__(self):
        if min(self.k) < 0:
            raise ValidationError(f"elastic constants must be nonnegative, got {self.k}")

    @property
    def k(self):
        return (self.k1, self.k2, self.k3, self.k4, self.k5)

    @property
    def k_max(self):
        return max(self.k1 + self.k3, 2 * self.k2 + self.k4 + 4 * self.k5)

    def lam(self, A):
        return lambda_apply(self.k1, self.k2, A)

    def theta(self, G):
        return theta_apply(self.k3, self.k4, self.k5, G)

    @cached_property
    def lambda_dense(self):
        return lambda_dense(self.k1, self.k2)

    @cached_property
    def theta_dense(self):
        return theta_dense(self.k3, self.k4, self.k5)


@dataclass(frozen=True)
class FrankConstants:
    K1: float
    K2: float
    K3: float

    def __post_init__(self):
        derive_k(self.K1, self.K2, self.K3)

    @property
    def k(self):
        return derive_k(self.K1, self.K2, self.K3)

    def tensors(self):
        return ElasticTensors(*self.k)


def _curl_from_gradient(S):
    # curl_i = Υ_ijk ∂_j d_k = Υ_ijk S_kj
    return tk.t3_mat(tk.LEVI_CIVITA, np.swapaxes(S, -1, -2))


def energy_density_K(h, S, frank: FrankConstants):
    """Splay/twist/bend form; agrees with the other forms only for ``|h| = 1``."""
    div = tk.tr(S)
    curl = _curl_from_gradient(S)
    return 0.5 * (
        frank.K1 * div**2
        + frank.K2 * tk.dot(h, curl) ** 2
        + frank.K3 * np.sum(tk.cross(h, curl) ** 2, axis=-1)
    )


def energy_density_k(h, S, et: ElasticTensors):
    div = tk.tr(S)
    curl = _curl_from_gradient(S)
    two_f = (
        et.k1 * div**2
        + et.k2 * np.sum(curl**2, axis=-1)
        + et.k3 * tk.dot(h, h) * div**2
        + et.k4 * tk.dot(h, curl) ** 2
        + et.k5 * np.sum(tk.cross(h, curl) ** 2, axis=-1)
    )
    return 0.5 * two_f


def energy_density_tensor(h, S, et: ElasticTensors):
    Sh = tk.mat_outer_vec(S, h)
    return 0.5 * (tk.frob(S, et.lam(S)) + tk.t3_dot_t3(Sh, et.theta(Sh)))


def energy_density_dense(h, S, et: ElasticTensors):
    """Same as :func:`energy_density_tensor` through dense 3⁴/3⁶ arrays."""
    Sh = tk.mat_outer_vec(S, h)
    return 0.5 * (
        tk.frob(S, tk.t4_mat(et.lambda_dense, S))
        + tk.t3_dot_t3(Sh, tk.t6_t3(et.theta_dense, Sh))
    )


energy_density = energy_density_tensor


def F_S(h, S, et: ElasticTensors):
    """Derivative of the energy density with respect to S."""
    W = tk.skw(S)
    trS = tk.tr(S)[..., None, None]
    hx = tk.cross_matrix(h)
    hh = tk.dot(h, h)[..., None, None]
    return (
        et.k1 * trS * tk.EYE
        + 2 * et.k2 * W
        + et.k3 * trS * hh * tk.EYE
        + et.k4 * hx * tk.frob(hx, W)[..., None, None]
        + 4 * et.k5 * tk.skw(tk.outer(tk.matvec(W, h), h))
    )


def F_h(h, S, et: ElasticTensors):
    """Derivative of the energy density with respect to h."""
    W = tk.skw(S)
    hx = tk.cross_matrix(h)
    return (
        et.k3 * (tk.tr(S) ** 2)[..., None] * h
        + 2 * et.k4 * tk.frob(hx, W)[..., None] * tk.uncross(W)
        + 4 * et.k5 * tk.matvec(tk.matmul(np.swapaxes(W, -1, -2), W), h)
    )


def F_S_tensor(h, S, et: ElasticTensors):
    """``F_S = Λ:S + h·Θ⋮(S⊗h)``; second evaluation path."""
    G = et.theta(tk.mat_outer_vec(S, h))
    return et.lam(S) + tk.t3_vec(G, h)


def F_h_tensor(h, S, et: ElasticTensors):
    """``F_h = S : Θ⋮(S⊗h)``; second evaluation path."""
    return tk.mat_t3(S, et.theta(tk.mat_outer_vec(S, h)))


def ellipticity_form(a, b, et: ElasticTensors):
    """``(a⊗b):Λ:(a⊗b)``."""
    ab = tk.outer(a, b)
    return tk.frob(ab, et.lam(ab))


def theta_form(X, et: ElasticTensors):
    """``X⋮Θ⋮X`` for a third-order X."""
    return tk.t3_dot_t3(X, et.theta(X))


def alin_ratio(X, et: ElasticTensors):
    """``|Θ⋮X|² / (X⋮Θ⋮X)``, the quantity bounded by a constant in the
    algebraic inequality for Θ. Returns nan where the denominator vanishes."""
    num = np.sum(et.theta(X) ** 2, axis=(-3, -2, -1))
    den = theta_form(X, et)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.nan)
