"""Plane-wave solver for laterally uniform multilayers.

Amplitudes are propagated with the Airy-type recursion for the reflection
coefficient (only decaying exponentials appear), so thick or strongly
absorbing stacks do not overflow. Per-layer absorbance is the drop in
normal Poynting flux across each layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .materials import RangeError, refractive_index
from .stack import Excitation, GratingLayer, Stack, UniformLayer

__all__ = [
    "OpticalResponse",
    "UnsupportedStackError",
    "tmm_response",
    "spectral_sweep",
    "admittance",
    "branch_sqrt",
]


class UnsupportedStackError(ValueError):
    category = "unsupported-stack"


@dataclass(frozen=True)
class OpticalResponse:
    R: float
    T: float
    absorbance_per_layer: tuple

    @property
    def A(self) -> float:
        return float(sum(self.absorbance_per_layer))

    # long-form aliases
    @property
    def reflectance(self) -> float:
        return self.R

    @property
    def transmittance(self) -> float:
        return self.T

    @property
    def absorbance_total(self) -> float:
        return self.A


def branch_sqrt(z):
    """Square root on the branch with Im >= 0 (Re >= 0 when purely real)."""
    s = np.sqrt(np.asarray(z, dtype=complex))
    flip = (s.imag < 0) | ((s.imag == 0) & (s.real < 0))
    return np.where(flip, -s, s)


def admittance(eps, kx, polarization):
    """Normalised kz and the tangential-field admittance for one medium."""
    kz = branch_sqrt(eps - kx**2)
    if polarization == "TE":
        return kz, kz
    return kz, kz / eps


def _layer_eps(stack: Stack, wavelength: float):
    eps = []
    for layer in stack.layers:
        if isinstance(layer, GratingLayer):
            if not layer.is_uniform:
                raise UnsupportedStackError(
                    "stack contains grating layers; use rcwa.rcwa_response"
                )
            eps.append(refractive_index(layer.ridge_material, wavelength) ** 2)
        else:
            eps.append(refractive_index(layer.material, wavelength) ** 2)
    return eps


def _solve(eps_sup, eps_layers, thicknesses, eps_sub, wavelength, kx, polarization):
    k0 = 2 * np.pi / wavelength
    _, eta_sup = admittance(eps_sup, kx, polarization)
    kzs, etas = zip(*(admittance(e, kx, polarization) for e in eps_layers)) if eps_layers else ((), ())
    _, eta_sub = admittance(eps_sub, kx, polarization)
    etas_all = [eta_sup, *etas, eta_sub]
    phases = [np.exp(1j * kz * k0 * d) for kz, d in zip(kzs, thicknesses)]

    n_int = len(etas_all) - 1
    r_if = [(etas_all[i] - etas_all[i + 1]) / (etas_all[i] + etas_all[i + 1]) for i in range(n_int)]
    t_if = [2 * etas_all[i] / (etas_all[i] + etas_all[i + 1]) for i in range(n_int)]

    # rho[j]: backward/forward ratio at the top of medium j (j=0 superstrate, L+1 substrate)
    L = len(eps_layers)
    rho = [0j] * (L + 2)
    gamma_bottom = [0j] * (L + 1)  # ratio just above interface j (bottom of medium j)
    for j in range(L, -1, -1):
        g = (r_if[j] + rho[j + 1]) / (1 + r_if[j] * rho[j + 1])
        gamma_bottom[j] = g
        rho[j] = g * phases[j - 1] ** 2 if j >= 1 else g

    # forward amplitude at the top of each medium
    fwd = [0j] * (L + 2)
    fwd[0] = 1.0 + 0j
    bottom_fwd = 1.0 + 0j
    for j in range(0, L + 1):
        if j >= 1:
            bottom_fwd = fwd[j] * phases[j - 1]
        fwd[j + 1] = t_if[j] * bottom_fwd / (1 + r_if[j] * rho[j + 1])

    inc_flux = np.real(eta_sup)
    flux_top = []
    for j in range(1, L + 2):
        f = fwd[j]
        b = rho[j] * f
        eta = etas_all[j]
        flux_top.append(np.real(np.conj(f + b) * eta * (f - b)) / inc_flux)
    R = float(abs(rho[0]) ** 2)
    T = float(flux_top[-1])
    absorb = tuple(float(flux_top[i] - flux_top[i + 1]) for i in range(L))
    return R, T, absorb


def tmm_response(stack: Stack, excitation: Excitation) -> OpticalResponse:
    """R, T and per-layer absorbance of a planar stack for one plane wave."""
    wl = excitation.wavelength
    eps_layers = _layer_eps(stack, wl)
    eps_sup = refractive_index(stack.superstrate, wl) ** 2
    eps_sub = refractive_index(stack.substrate, wl) ** 2
    kx = np.sqrt(eps_sup).real * np.sin(np.deg2rad(excitation.angle))
    R, T, absorb = _solve(
        eps_sup,
        eps_layers,
        [l.thickness for l in stack.layers],
        eps_sub,
        wl,
        kx,
        excitation.polarization,
    )
    return OpticalResponse(R, T, absorb)


def wavelength_grid(start: float, stop: float, step: float) -> np.ndarray:
    if not start < stop:
        raise RangeError(f"sweep start {start} must be below stop {stop}")
    if not step > 0:
        raise RangeError(f"sweep step must be positive, got {step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def spectral_sweep(stack, start, stop, step, polarization="TE", angle=0.0, solver=None):
    """One response per grid point ``start + i*step`` up to and including ``stop``."""
    if solver is None:
        solver = tmm_response
    return [
        (float(wl), solver(stack, Excitation(float(wl), polarization, angle)))
        for wl in wavelength_grid(start, stop, step)
    ]
