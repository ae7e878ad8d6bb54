"""One-dimensional Euler equations: state conversions and Roe's flux.

Conservative states have shape ``(..., 3)`` holding ``(rho, rho u, rho E)``.
"""

import numpy as np

from ..errors import StateValidityError


def primitive(U, gamma):
    """``(rho, u, p)`` from conservative variables."""
    U = np.asarray(U, dtype=np.float64)
    rho = U[..., 0]
    u = U[..., 1] / rho
    p = (gamma - 1.0) * (U[..., 2] - 0.5 * rho * u * u)
    return rho, u, p


def conservative(rho, u, p, gamma):
    rho, u, p = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in (rho, u, p)))
    return np.stack([rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u], axis=-1)


def physical_flux(U, gamma):
    rho, u, p = primitive(U, gamma)
    E = U[..., 2]
    return np.stack([rho * u, rho * u * u + p, u * (E + p)], axis=-1)


def _check(rho, p, side):
    if np.any(~(rho > 0)) or np.any(~(p > 0)):
        raise StateValidityError(f"{side} state has non-positive density or pressure")


def roe_flux(UL, UR, gamma, grid_velocity=0.0, check=True):
    """Roe flux for a face moving with ``grid_velocity``.

    Returns ``F(U) - v U`` upwinded with the Roe-averaged wave speeds shifted
    by ``-v``; with ``v = 0`` this is the classical Roe flux. Inputs broadcast
    over leading axes.
    """
    UL = np.asarray(UL, dtype=np.float64)
    UR = np.asarray(UR, dtype=np.float64)
    rl, ul, pl = primitive(UL, gamma)
    rr, ur, pr = primitive(UR, gamma)
    if check:
        _check(rl, pl, "left")
        _check(rr, pr, "right")
    v = np.asarray(grid_velocity, dtype=np.float64)

    hl = (UL[..., 2] + pl) / rl
    hr = (UR[..., 2] + pr) / rr
    sl, sr = np.sqrt(rl), np.sqrt(rr)
    u = (sl * ul + sr * ur) / (sl + sr)
    h = (sl * hl + sr * hr) / (sl + sr)
    c2 = (gamma - 1.0) * (h - 0.5 * u * u)
    if check and np.any(~(c2 > 0)):
        raise StateValidityError("Roe-averaged sound speed is not real")
    c = np.sqrt(c2)
    rho = sl * sr

    drho, du, dp = rr - rl, ur - ul, pr - pl
    a1 = (dp - rho * c * du) / (2.0 * c2)
    a2 = drho - dp / c2
    a3 = (dp + rho * c * du) / (2.0 * c2)
    l1, l2, l3 = np.abs(u - c - v), np.abs(u - v), np.abs(u + c - v)

    diss = np.stack([
        l1 * a1 + l2 * a2 + l3 * a3,
        l1 * a1 * (u - c) + l2 * a2 * u + l3 * a3 * (u + c),
        l1 * a1 * (h - u * c) + l2 * a2 * 0.5 * u * u + l3 * a3 * (h + u * c),
    ], axis=-1)
    v3 = v[..., None] if v.ndim else v
    central = 0.5 * (physical_flux(UL, gamma) - v3 * UL + physical_flux(UR, gamma) - v3 * UR)
    return central - 0.5 * diss


def roe_flux_1d(UL, UR, gamma=1.4):
    """Classical (fixed-face) Roe flux between two conservative states."""
    return roe_flux(UL, UR, gamma)


def wall_ghost(U, wall_velocity, gamma):
    """Reflecting-wall ghost state: velocity mirrored about ``wall_velocity``."""
    rho, u, p = primitive(U, gamma)
    return conservative(rho, 2.0 * np.asarray(wall_velocity) - u, p, gamma)
