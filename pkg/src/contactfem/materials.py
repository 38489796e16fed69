"""Constitutive models: isotropic Hooke plane strain and power-law
isotropic-hardening von Mises plasticity (radial return, plane strain with
tracked out-of-plane stress).

Units: MPa, mm, s; density in tonne/mm^3 so nodal forces come out in N per
unit thickness.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ReturnMapError(RuntimeError):
    """Scalar consistency iteration failed to converge."""


@dataclass(frozen=True)
class HookeParams:
    E: float            # Young's modulus, MPa
    nu: float           # Poisson ratio
    rho: float = 7.8e-9  # density, tonne/mm^3

    def __post_init__(self):
        if self.E <= 0:
            raise ValueError("E must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("nu must be in [0, 0.5)")
        if self.rho <= 0:
            raise ValueError("density must be positive")

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1 - 2 * self.nu) * (1 + self.nu))

    @property
    def shear(self) -> float:
        return self.E / (2 * (1 + self.nu))

    @property
    def dilatational_modulus(self) -> float:
        """lambda + 2G, the plane-strain P-wave modulus."""
        return self.lam + 2 * self.shear

    def plane_strain_matrix(self) -> np.ndarray:
        lam, G = self.lam, self.shear
        return np.array([
            [lam + 2 * G, lam, 0.0],
            [lam, lam + 2 * G, 0.0],
            [0.0, 0.0, G],
        ])


@dataclass(frozen=True)
class PowerLawPlasticity:
    """Hooke elasticity plus von Mises yield sigma_eq = A (eps0 + ep)^n."""

    E: float
    nu: float
    A: float
    eps0: float
    n: float
    rho: float = 7.8e-9

    def __post_init__(self):
        HookeParams(self.E, self.nu, self.rho)  # reuse range checks
        if self.A <= 0 or self.eps0 <= 0:
            raise ValueError("A and eps0 must be positive")
        if not 0.0 < self.n < 1.0:
            raise ValueError("hardening exponent must be in (0, 1)")

    @property
    def hooke(self) -> HookeParams:
        return HookeParams(self.E, self.nu, self.rho)

    def yield_stress(self, ep):
        return self.A * (self.eps0 + ep) ** self.n

    def yield_slope(self, ep):
        return self.A * self.n * (self.eps0 + ep) ** (self.n - 1.0)


def hooke_stress(eps: np.ndarray, params: HookeParams) -> np.ndarray:
    """Plane-strain stress [s_xx, s_yy, s_xy] of strain [e_xx, e_yy, gamma_xy].

    Works on a single (3,) row or any (..., 3) array.
    """
    eps = np.asarray(eps, dtype=float)
    lam, G = params.lam, params.shear
    sig = np.empty_like(eps)
    tr = eps[..., 0] + eps[..., 1]
    sig[..., 0] = lam * tr + 2 * G * eps[..., 0]
    sig[..., 1] = lam * tr + 2 * G * eps[..., 1]
    sig[..., 2] = G * eps[..., 2]
    return sig


def hooke_stress_zz(eps: np.ndarray, params: HookeParams) -> np.ndarray:
    """Out-of-plane stress lambda*(e_xx + e_yy) under plane strain."""
    eps = np.asarray(eps, dtype=float)
    return params.lam * (eps[..., 0] + eps[..., 1])


def von_mises(sigma4: np.ndarray) -> np.ndarray:
    """Equivalent stress of [s_xx, s_yy, s_xy, s_zz] rows."""
    s = np.asarray(sigma4, dtype=float)
    p = (s[..., 0] + s[..., 1] + s[..., 3]) / 3.0
    dxx = s[..., 0] - p
    dyy = s[..., 1] - p
    dzz = s[..., 3] - p
    j2 = 0.5 * (dxx ** 2 + dyy ** 2 + dzz ** 2) + s[..., 2] ** 2
    return np.sqrt(3.0 * j2)


def plastic_return_map(deps: np.ndarray, sigma4: np.ndarray, ep: np.ndarray,
                       params: PowerLawPlasticity,
                       tol: float = 1e-10, max_iter: int = 50):
    """Radial-return update for strain increments deps (..., 3).

    State in/out: sigma4 (..., 4) rows [s_xx, s_yy, s_xy, s_zz] and
    accumulated plastic strain ep (...,). Returns (sigma4_new, ep_new,
    dep) without mutating the inputs; dep is the plastic increment.
    """
    deps = np.asarray(deps, dtype=float)
    sigma4 = np.asarray(sigma4, dtype=float)
    ep = np.asarray(ep, dtype=float)
    lam, G = params.hooke.lam, params.hooke.shear

    trial = sigma4.copy()
    tr = deps[..., 0] + deps[..., 1]
    trial[..., 0] += lam * tr + 2 * G * deps[..., 0]
    trial[..., 1] += lam * tr + 2 * G * deps[..., 1]
    trial[..., 2] += G * deps[..., 2]
    trial[..., 3] += lam * tr

    q_tr = von_mises(trial)
    sy = params.yield_stress(ep)
    yielding = q_tr > sy * (1.0 + 1e-12)
    if not np.any(yielding):
        return trial, ep.copy(), np.zeros_like(ep)

    # scalar consistency: q_tr - 3G dg = A (eps0 + ep + dg)^n, Newton on dg
    q_y = q_tr[yielding]
    ep_y = ep[yielding]
    dg = (q_y - params.yield_stress(ep_y)) / (3 * G + params.yield_slope(ep_y))
    for _ in range(max_iter):
        r = q_y - 3 * G * dg - params.yield_stress(ep_y + dg)
        dr = -3 * G - params.yield_slope(ep_y + dg)
        step = r / dr
        dg = np.maximum(dg - step, 0.0)
        if np.all(np.abs(r) <= tol * np.maximum(q_y, 1.0)):
            break
    else:
        worst = float(np.abs(r).max())
        raise ReturnMapError(
            f"radial return did not converge in {max_iter} iterations "
            f"(max residual {worst:.3e} MPa)"
        )

    sig_new = trial.copy()
    p = (trial[..., 0] + trial[..., 1] + trial[..., 3]) / 3.0
    scale = np.zeros_like(q_tr)
    scale[yielding] = 3 * G * dg / q_tr[yielding]
    sig_new[..., 0] -= scale * (trial[..., 0] - p)
    sig_new[..., 1] -= scale * (trial[..., 1] - p)
    sig_new[..., 2] -= scale * trial[..., 2]
    sig_new[..., 3] -= scale * (trial[..., 3] - p)

    ep_new = ep.copy()
    ep_new[yielding] += dg
    dep = np.zeros_like(ep)
    dep[yielding] = dg
    return sig_new, ep_new, dep
