"""Leslie and Ericksen stresses, the co-rotational rate and viscous dissipation.

All functions are pointwise and broadcast over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_kernel as tk
from .oseen_frank import ValidationError

UNIT_TOL = 1e-10


@dataclass(frozen=True)
class LeslieCoefficients:
    mu1: float
    mu2: float
    mu3: float
    mu4: float
    mu5: float
    mu6: float
    lam: float

    @property
    def mu23(self):
        return self.mu2 + self.mu3

    @property
    def mu56(self):
        return self.mu5 + self.mu6

    @property
    def cross_coefficient(self):
        """``(μ2+μ3) - λ``; zero under Parodi's relation."""
        return self.mu23 - self.lam

    def dissipativity_violations(self):
        return validate_dissipativity(self)

    def require_dissipative(self):
        bad = validate_dissipativity(self)
        if bad:
            raise ValidationError("Leslie coefficients not dissipative: " + ", ".join(bad))
        return self


def validate_dissipativity(c: LeslieCoefficients):
    """Names of the violated dissipativity inequalities; empty when admissible."""
    a = c.mu56 - c.lam * c.mu23
    checks = {
        "mu1 > 0": c.mu1 > 0,
        "mu4 > 0": c.mu4 > 0,
        "(mu5+mu6) - lambda(mu2+mu3) > 0": a > 0,
        "mu1 + lambda(mu2+mu3) > 0": c.mu1 + c.lam * c.mu23 > 0,
        "4((mu5+mu6) - lambda(mu2+mu3)) > ((mu2+mu3) - lambda)^2": 4 * a > c.cross_coefficient**2,
    }
    return [name for name, ok in checks.items() if not ok]


def parodi_holds(c: LeslieCoefficients, tol=1e-12):
    """``λ = μ2 + μ3`` up to rounding of the coefficient sums."""
    return abs(c.lam - c.mu23) <= tol * max(1.0, abs(c.lam), abs(c.mu2), abs(c.mu3))


def check_unit(d, tol=UNIT_TOL):
    dev = np.max(np.abs(np.linalg.norm(d, axis=-1) - 1.0)) if np.size(d) else 0.0
    if dev > tol:
        raise ValidationError(f"director is not unit length (max deviation {dev:.3e})")


def corotational_rate_e(dt_d, v, grad_d, grad_v, d):
    """``e = ∂t d + (∇d) v - skw(∇v) d``."""
    return dt_d + tk.matvec(grad_d, v) - tk.matvec(tk.skw(grad_v), d)


def corotational_rate_from_q(d, grad_v, q, c: LeslieCoefficients):
    """``e = -(I - d⊗d)(λ sym(∇v) d + q)``, valid along solutions of the director equation."""
    r = c.lam * tk.matvec(tk.sym(grad_v), d) + q
    return -(r - tk.dot(d, r)[..., None] * d)


def leslie_stress(d, e, grad_v, c: LeslieCoefficients, check=True):
    if check:
        check_unit(d)
    A = tk.sym(grad_v)
    Ad = tk.matvec(A, d)
    dAd = tk.dot(d, Ad)[..., None, None]
    d_Ad = tk.outer(d, Ad)
    d_e = tk.outer(d, e)
    return (
        c.mu1 * dAd * tk.outer(d, d)
        + c.mu4 * A
        + c.mu56 * tk.sym(d_Ad)
        + c.mu23 * tk.sym(d_e)
        + c.lam * tk.skw(d_Ad)
        + tk.skw(d_e)
    )


def ericksen_stress(grad_d, FS):
    """``T^E = ∇dᵀ F_S``."""
    return tk.matmul(np.swapaxes(grad_d, -1, -2), FS)


def dissipation_density(d, A, q, c: LeslieCoefficients):
    """Pointwise dissipation rate for symmetric velocity gradient ``A``."""
    Ad = tk.matvec(A, d)
    return (
        (c.mu1 + c.lam * c.mu23) * tk.dot(d, Ad) ** 2
        + c.mu4 * tk.frob(A, A)
        + (c.mu56 - c.lam * c.mu23) * tk.dot(Ad, Ad)
        + np.sum(tk.cross(d, q) ** 2, axis=-1)
    )


def cross_term(d, A, q, c: LeslieCoefficients):
    """``((μ2+μ3) - λ) (d×q)·(d×A d)``; exactly zero under Parodi's relation."""
    if parodi_holds(c):
        return np.zeros(np.broadcast_shapes(np.shape(d)[:-1], np.shape(q)[:-1], np.shape(A)[:-2]))
    return c.cross_coefficient * tk.dot(tk.cross(d, q), tk.cross(d, tk.matvec(A, d)))


def power_balance(d, grad_v, q, c: LeslieCoefficients):
    """``T^L:∇v - (d × skw(∇v) d)·(d × q) - e·q`` with e from the director equation.

    The first two terms are the power absorbed by the flow, the last one the
    power of the director relaxation. For unit d the sum equals
    ``dissipation_density - cross_term`` pointwise.
    """
    A = tk.sym(grad_v)
    e = corotational_rate_from_q(d, grad_v, q, c)
    TL = leslie_stress(d, e, grad_v, c, check=False)
    Wd = tk.matvec(tk.skw(grad_v), d)
    return tk.frob(TL, grad_v) - tk.dot(tk.cross(d, Wd), tk.cross(d, q)) - tk.dot(e, q)
