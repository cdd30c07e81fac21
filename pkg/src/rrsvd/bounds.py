"""Diagnostics for the projection bases: distance bounds, expansion
coefficients, the deflated-resolvent series and CG conditioning.

These take full (oracle) SVD information and are meant for verification at
desk scale. Nothing in the updating algorithms depends on them.
"""
import math

import numpy as np

__all__ = [
    "projection_distance",
    "basic_distance_bound",
    "enhanced_distance_bound",
    "expansion_coefficients",
    "reconstruct_left_vector",
    "deflated_resolvent",
    "resolvent_series",
    "series_ratios",
    "effective_condition_bound",
    "cg_iteration_bound",
]


def projection_distance(basis, u):
    """``min_{z in range(Z)} ||u - z||`` for an orthonormal block basis."""
    u = np.asarray(u, dtype=np.float64)
    return float(np.linalg.norm(u - basis.apply(basis.apply_adjoint(u))))


def _omega(m, n, k, ety_norm):
    return math.sqrt(max(min(m, n) - k, 0)) * ety_norm


def basic_distance_bound(sigma_next, sigma_hat, ety_norm, m, n, k):
    """Distance bound for ``Z = blockdiag(U_k, I_s)``.

    ``sigma_next`` is the (k+1)-th singular value of ``B``, ``sigma_hat`` the
    i-th of ``A`` and ``ety_norm`` is ``||E^H y_i||`` with ``y_i`` the bottom
    block of the exact left singular vector. Infinite when the denominator
    vanishes.
    """
    den = sigma_next**2 - sigma_hat**2
    if den == 0:
        return math.inf
    return _omega(m, n, k, ety_norm) * abs(sigma_next / den)


def enhanced_distance_bound(sigma_next, sigma_hat, ety_norm, m, n, k, lam):
    """Distance bound once ``-(I - U_k U_k^H)(B B^H - lam I)^{-1} B E^H`` joins the basis."""
    den = (sigma_next**2 - sigma_hat**2) * (sigma_next**2 - lam)
    if den == 0:
        return math.inf
    return _omega(m, n, k, ety_norm) * abs(sigma_next * (sigma_hat**2 - lam) / den)


def expansion_coefficients(full_b, E, sigma_hat, y_hat):
    """Coordinates of the top block of ``u_hat`` in the left singular basis of ``B``.

    ``full_b`` is a thin SVD of ``B`` with ``min(m, n)`` triplets and ``E``
    the dense update block. Returns ``-(E v_j)^H y * sigma_j / (sigma_j^2 - sigma_hat^2)``.
    """
    ev = np.asarray(E) @ full_b.v
    s = full_b.s
    return -(ev.T @ y_hat) * s / (s**2 - sigma_hat**2)


def reconstruct_left_vector(full_b, E, sigma_hat, y_hat):
    chi = expansion_coefficients(full_b, E, sigma_hat, y_hat)
    return np.concatenate([full_b.u @ chi, y_hat])


def deflated_resolvent(u_full, s_full, k, shift):
    """Dense ``(I - U_k U_k^H)(B B^H - shift I)^{-1}``.

    ``u_full`` is a complete ``m x m`` left basis of ``B`` and ``s_full``
    its singular values padded with zeros to length ``m``.
    """
    d = 1.0 / (np.asarray(s_full) ** 2 - shift)
    d[:k] = 0.0
    return (u_full * d) @ u_full.T


def resolvent_series(b_lam, shift_gap, terms):
    """Partial sums ``B(lam) sum_{rho=0}^{P} [shift_gap B(lam)]^rho`` for P = 0..terms.

    ``shift_gap`` is ``sigma_hat_i^2 - lam``.
    """
    out = []
    power = b_lam.copy()
    total = b_lam.copy()
    out.append(total.copy())
    step = shift_gap * b_lam
    for _ in range(terms):
        power = power @ step
        total = total + power
        out.append(total.copy())
    return out


def series_ratios(s_full, k, sigma_hat, lam):
    """``gamma_{j,i} = (sigma_hat^2 - lam) / (sigma_j^2 - lam)`` for j > k."""
    s = np.asarray(s_full)[k:]
    return (sigma_hat**2 - lam) / (s**2 - lam)


def effective_condition_bound(lam, sigma_next):
    """Upper bound ``lam / (lam - sigma_{k+1}^2)`` on the deflated system's condition number."""
    if lam <= sigma_next**2:
        raise ValueError("lam must exceed sigma_{k+1}^2")
    return lam / (lam - sigma_next**2)


def cg_iteration_bound(kappa, tol):
    """Iterations after which ``2((sqrt(k)-1)/(sqrt(k)+1))^j`` surely drops below ``tol``."""
    return int(math.ceil(math.sqrt(kappa) / 2.0 * math.log(2.0 / tol)))
