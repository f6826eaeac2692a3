"""Fixed-dimension (3D) tensor algebra.

Every function broadcasts over leading axes, so the same kernels act on a
single point or on a whole grid of points. Index conventions:

* vectors ``(..., 3)``, matrices ``(..., 3, 3)``
* third order ``(..., 3, 3, 3)``, fourth order ``(..., 3, 3, 3, 3)``,
  sixth order ``(..., 3, 3, 3, 3, 3, 3)``

The generic contractions below take dense tensors. The elastic tensors used
at field scale are applied through closed Kronecker-delta forms instead (see
:mod:`nematic.oseen_frank`); the dense versions serve as the oracle.
"""
from __future__ import annotations

import itertools

import numpy as np

EYE = np.eye(3)


def sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def skw(A):
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def tr(A):
    return np.trace(A, axis1=-2, axis2=-1)


def frob(A, B):
    """Frobenius product ``A:B``."""
    return np.einsum("...ij,...ij->...", A, B)


def dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def outer(a, b):
    return a[..., :, None] * b[..., None, :]


def matvec(A, b):
    return np.einsum("...ij,...j->...i", A, b)


def matmul(A, B):
    return np.einsum("...ij,...jk->...ik", A, B)


def mat_outer_vec(A, a):
    """``A ⊗ a`` with entries ``A_ij a_k``."""
    return A[..., :, :, None] * a[..., None, None, :]


def cross_matrix(h):
    """Skew matrix ``[h]x`` such that ``[h]x b = h x b``."""
    h = np.asarray(h, dtype=float)
    M = np.zeros(h.shape[:-1] + (3, 3))
    M[..., 0, 1] = -h[..., 2]
    M[..., 0, 2] = h[..., 1]
    M[..., 1, 0] = h[..., 2]
    M[..., 1, 2] = -h[..., 0]
    M[..., 2, 0] = -h[..., 1]
    M[..., 2, 1] = h[..., 0]
    return M


def uncross(A):
    """Left inverse of :func:`cross_matrix`: ``(A_32, A_13, A_21)``."""
    A = np.asarray(A, dtype=float)
    return np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)


def _permutation_sign(p):
    sign = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def levi_civita():
    eps = np.zeros((3, 3, 3))
    for p in itertools.permutations(range(3)):
        eps[p] = _permutation_sign(p)
    return eps


LEVI_CIVITA = levi_civita()


def cross(a, b):
    """``a x b`` written as ``Υ:(a⊗b)``."""
    return t3_mat(LEVI_CIVITA, outer(a, b))


def levi_civita_product_deltas():
    """Delta expansion of ``Υ_kji Υ_nml`` indexed ``[i, j, k, l, m, n]``."""
    d = EYE
    return (
        np.einsum("kn,jm,il->ijklmn", d, d, d)
        + np.einsum("km,jl,in->ijklmn", d, d, d)
        + np.einsum("kl,jn,im->ijklmn", d, d, d)
        - np.einsum("kn,jl,im->ijklmn", d, d, d)
        - np.einsum("km,jn,il->ijklmn", d, d, d)
        - np.einsum("kl,jm,in->ijklmn", d, d, d)
    )


# Dense contractions with the index placement of the notation section.

def t4_mat(L, A):
    """``Λ:A``, summing the last two indices of Λ against A."""
    return np.einsum("...ijkl,...kl->...ij", L, A)


def t4_vec(L, a):
    """``Λ:a``, contracting the last index of Λ."""
    return np.einsum("...ijkl,...l->...ijk", L, a)


def t4_t3(L, G):
    """``Λ:Γ`` -> third order, sum over k, l."""
    return np.einsum("...ijkl,...klm->...ijm", L, G)


def t4_tdot_t3(L, G):
    """``Λ⋮Γ`` -> vector, sum over j, k, l."""
    return np.einsum("...ijkl,...jkl->...i", L, G)


def mat_t6(A, T):
    """``A:Θ`` -> fourth order, contracting the first two indices of Θ."""
    return np.einsum("...ij,...ijklmn->...klmn", A, T)


def t6_t3(T, G):
    """``Θ⋮Γ`` -> third order, contracting the last three indices of Θ."""
    return np.einsum("...ijklmn,...lmn->...ijk", T, G)


def vec_t6(a, T):
    """``a·Θ``, contracting the third index of Θ (order five result)."""
    return np.einsum("...k,...ijklmn->...ijlmn", a, T)


def t5_t3(T5, G):
    """Triple contraction of an order five ``(i,j,l,m,n)`` tensor with Γ."""
    return np.einsum("...ijlmn,...lmn->...ij", T5, G)


def t3_mat(G, A):
    """``Γ:A`` -> vector."""
    return np.einsum("...ijk,...jk->...i", G, A)


def t3_dot_mat(G, A):
    """``Γ·A`` -> third order with entries ``Σ_k Γ_ijk A_kl``."""
    return np.einsum("...ijk,...kl->...ijl", G, A)


def t3_vec(G, a):
    """``Γ·a`` -> matrix."""
    return np.einsum("...ijk,...k->...ij", G, a)


def t3_dot_t3(G, H):
    """``Γ⋮H`` -> scalar."""
    return np.einsum("...ijk,...ijk->...", G, H)


def mat_t3(A, G):
    """``A:Γ`` contracting the first two indices of Γ -> vector."""
    return np.einsum("...ij,...ijk->...k", A, G)


def norm(X, order):
    """Euclidean norm of a tensor of the given order over its last axes."""
    axes = tuple(range(-order, 0))
    return np.sqrt(np.sum(np.asarray(X) ** 2, axis=axes))
