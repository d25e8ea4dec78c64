"""Rigorous coupled-wave analysis for 1D lamellar gratings (classical mount).

Fields are expanded in the 2N+1 Floquet harmonics ``kx_m = n_sup sin(theta) + m lambda/period``
(normalised to k0). Uniform layers are diagonal in that basis; grating layers
need a dense complex eigendecomposition. TE uses the Laurent rule on eps; TM
uses the inverse rule ([[1/eps]]^-1 and [[eps]]^-1), which converges far
faster for metal-like ridges.

Layers are chained with a reflection-matrix recursion from the substrate up
followed by a forward sweep for the amplitudes. Every exponential in the
recursion is a decaying one, so evanescent orders in the thick mirror
layers cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .materials import refractive_index
from .stack import Excitation, GratingLayer, Stack, StackError, UniformLayer
from .tmm import OpticalResponse, admittance, branch_sqrt

__all__ = [
    "HarmonicBasis",
    "FourierProfile",
    "NumericalError",
    "RCWAResult",
    "lamellar_fourier",
    "permittivity_fourier",
    "rcwa_response",
    "rcwa_solve",
    "solve_profiles",
    "convergence_report",
    "ConvergenceReport",
    "EIG_RESIDUAL_TOL",
]

EIG_RESIDUAL_TOL = 1e-10


class NumericalError(ArithmeticError):
    category = "numerical-error"


@dataclass(frozen=True)
class HarmonicBasis:
    order: int = 15
    period: float | None = None

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 0:
            raise ValueError(f"truncation order must be a non-negative integer, got {self.order!r}")

    @property
    def size(self) -> int:
        return 2 * self.order + 1

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.order, self.order + 1)


@dataclass(frozen=True)
class FourierProfile:
    """Fourier coefficients of eps(x) and 1/eps(x) for orders -max_order..max_order."""

    orders: np.ndarray
    eps: np.ndarray
    inv_eps: np.ndarray

    def coefficient(self, m: int, inverse: bool = False) -> complex:
        arr = self.inv_eps if inverse else self.eps
        return complex(arr[m + (self.orders.size - 1) // 2])

    def toeplitz(self, n_orders: int):
        """Convolution matrices [[eps]] and [[1/eps]] of size 2N+1."""
        M = (self.orders.size - 1) // 2
        if 2 * n_orders > M:
            raise ValueError(f"profile holds orders up to {M}, need {2 * n_orders}")
        c = M  # index of order 0
        col = slice(c, c + 2 * n_orders + 1)  # orders 0..2N
        row = slice(c - 2 * n_orders, c + 1)  # orders -2N..0 (reversed below)
        E = toeplitz(self.eps[col], self.eps[row][::-1])
        P = toeplitz(self.inv_eps[col], self.inv_eps[row][::-1])
        return E, P


def lamellar_fourier(background, segments, max_order: int) -> np.ndarray:
    """Coefficients of a piecewise-constant periodic profile.

    ``segments`` is a list of ``(center, width, value)`` in units of the period,
    painted over ``background``. Convention: f(x) = sum_m c_m exp(2 pi i m x / period).
    """
    m = np.arange(-max_order, max_order + 1)
    coeffs = np.zeros(m.size, dtype=complex)
    coeffs[max_order] = background
    for center, width, value in segments:
        if width >= 1.0:
            # whole cell covered; sinc(m) is only zero to rounding
            coeffs[:] = 0
            coeffs[max_order] = value
            continue
        coeffs += (value - background) * width * np.sinc(m * width) * np.exp(-2j * np.pi * m * center)
    return coeffs


def permittivity_fourier(layer: GratingLayer, wavelength: float, max_order: int) -> FourierProfile:
    """Analytic coefficients of eps and 1/eps for a ridge centred at the cell origin."""
    eps_r = refractive_index(layer.ridge_material, wavelength) ** 2
    eps_g = refractive_index(layer.groove_material, wavelength) ** 2
    ff = layer.fill_factor
    seg = [(0.0, ff, eps_r)]
    eps = lamellar_fourier(eps_g, seg, max_order)
    inv = lamellar_fourier(1 / eps_g, [(0.0, ff, 1 / eps_r)], max_order)
    return FourierProfile(np.arange(-max_order, max_order + 1), eps, inv)


# --- per-layer modes -------------------------------------------------------------


@dataclass
class _Modes:
    W: np.ndarray  # tangential field a = W (f + g)
    V: np.ndarray  # tangential field b = V (f - g)
    gamma: np.ndarray  # normalised propagation constants, Im >= 0


def _uniform_modes(eps, kx, pol):
    gamma, eta = admittance(eps, kx, pol)
    n = kx.size
    return _Modes(np.eye(n, dtype=complex), np.diag(eta), gamma)


def _grating_modes(profile: FourierProfile, kx, pol, context=""):
    n = kx.size
    E, P = profile.toeplitz((n - 1) // 2)
    Kx = np.diag(kx)
    if pol == "TE":
        A = E - Kx @ Kx
    else:
        A = np.linalg.solve(P, np.eye(n) - Kx @ np.linalg.solve(E, Kx))
    try:
        lam, W = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed {context}: {exc}") from None
    norm = np.linalg.norm(A)
    resid = np.linalg.norm(A @ W - W * lam) / (norm if norm > 0 else 1.0)
    if not np.isfinite(resid) or resid > EIG_RESIDUAL_TOL:
        raise NumericalError(f"eigendecomposition residual {resid:.2e} {context}")
    gamma = branch_sqrt(lam)
    V = W * gamma if pol == "TE" else P @ (W * gamma)
    return _Modes(W, V, gamma)


def _interface(m1: _Modes, m2: _Modes):
    """S-matrix blocks mapping (f1 at bottom of 1, g2 at top of 2) -> (g1, f2)."""
    n = m1.W.shape[0]
    lhs = np.block([[m1.W, -m2.W], [-m1.V, -m2.V]])
    rhs = np.block([[-m1.W, m2.W], [-m1.V, -m2.V]])
    S = np.linalg.solve(lhs, rhs)
    return S[:n, :n], S[:n, n:], S[n:, :n], S[n:, n:]


@dataclass(frozen=True)
class RCWAResult:
    response: OpticalResponse
    orders: np.ndarray
    R_orders: np.ndarray
    T_orders: np.ndarray


def solve_profiles(
    wavelength,
    polarization,
    eps_sup,
    eps_sub,
    layers,
    period,
    order,
    angle=0.0,
):
    """Core solver.

    ``layers`` is a sequence of ``(medium, thickness_nm)`` where medium is either
    a complex permittivity (uniform) or a FourierProfile holding orders up to 2N.
    """
    pol = polarization.upper()
    k0 = 2 * np.pi / wavelength
    m = np.arange(-order, order + 1)
    n_sup = np.sqrt(eps_sup).real
    kx = n_sup * np.sin(np.deg2rad(angle)) + m * wavelength / period

    sup = _uniform_modes(eps_sup, kx, pol)
    sub = _uniform_modes(eps_sub, kx, pol)
    modes = [sup]
    phases = []
    cache = {}
    for idx, (medium, thickness) in enumerate(layers):
        if isinstance(medium, FourierProfile):
            mode = _grating_modes(
                medium, kx, pol, context=f"(layer {idx}, wavelength {wavelength:g} nm)"
            )
        else:
            key = complex(medium)
            if key not in cache:
                cache[key] = _uniform_modes(key, kx, pol)
            mode = cache[key]
        modes.append(mode)
        phases.append(np.exp(1j * mode.gamma * k0 * thickness))
    modes.append(sub)

    L = len(layers)
    nh = kx.size
    eye = np.eye(nh)
    interfaces = [_interface(modes[j], modes[j + 1]) for j in range(L + 1)]

    # rho[j]: backward = rho[j] @ forward at the top of medium j
    rho = [None] * (L + 2)
    rho[L + 1] = np.zeros((nh, nh), dtype=complex)
    for j in range(L, -1, -1):
        A11, A12, A21, A22 = interfaces[j]
        r = rho[j + 1]
        gamma_bot = A11 + A12 @ np.linalg.solve(eye - r @ A22, r @ A21)
        if j >= 1:
            X = phases[j - 1]
            rho[j] = X[:, None] * gamma_bot * X[None, :]
        else:
            rho[j] = gamma_bot

    inc = np.zeros(nh, dtype=complex)
    inc[order] = 1.0
    fwd = [None] * (L + 2)
    fwd[0] = inc
    for j in range(L + 1):
        f_bottom = fwd[j] if j == 0 else phases[j - 1] * fwd[j]
        A11, A12, A21, A22 = interfaces[j]
        fwd[j + 1] = np.linalg.solve(eye - A22 @ rho[j + 1], A21 @ f_bottom)

    eta_sup = np.diag(sup.V)
    inc_flux = np.real(eta_sup[order])
    flux_top = np.empty(L + 1)
    for j in range(1, L + 2):
        f = fwd[j]
        g = rho[j] @ f
        a = modes[j].W @ (f + g)
        b = modes[j].V @ (f - g)
        flux_top[j - 1] = np.real(np.vdot(a, b)) / inc_flux

    refl = rho[0] @ inc
    R_orders = np.real(eta_sup) * np.abs(refl) ** 2 / inc_flux
    eta_sub = np.diag(sub.V)
    T_orders = np.real(eta_sub) * np.abs(fwd[L + 1]) ** 2 / inc_flux
    absorb = tuple(float(flux_top[i] - flux_top[i + 1]) for i in range(L))
    resp = OpticalResponse(float(R_orders.sum()), float(flux_top[-1]), absorb)
    return RCWAResult(resp, m, R_orders, T_orders)


def _stack_media(stack: Stack, wavelength: float, order: int):
    media = []
    for layer in stack.layers:
        if isinstance(layer, UniformLayer):
            media.append((refractive_index(layer.material, wavelength) ** 2, layer.thickness))
        elif layer.is_uniform:
            media.append((refractive_index(layer.ridge_material, wavelength) ** 2, layer.thickness))
        else:
            media.append((permittivity_fourier(layer, wavelength, 2 * order), layer.thickness))
    return media


def rcwa_solve(stack: Stack, excitation: Excitation, basis: HarmonicBasis | int = 15) -> RCWAResult:
    if not isinstance(basis, HarmonicBasis):
        basis = HarmonicBasis(int(basis), stack.period)
    period = basis.period if basis.period is not None else stack.period
    if stack.period is not None and period != stack.period:
        raise StackError(f"basis period {period} does not match stack period {stack.period}")
    if period is None:
        # planar stack: any period works, orders stay decoupled
        period = excitation.wavelength / 2
    wl = excitation.wavelength
    return solve_profiles(
        wl,
        excitation.polarization,
        refractive_index(stack.superstrate, wl) ** 2,
        refractive_index(stack.substrate, wl) ** 2,
        _stack_media(stack, wl, basis.order),
        period,
        basis.order,
        excitation.angle,
    )


def rcwa_response(stack: Stack, excitation: Excitation, basis: HarmonicBasis | int = 15) -> OpticalResponse:
    """R, T (summed over propagating orders) and per-layer absorbance."""
    return rcwa_solve(stack, excitation, basis).response


@dataclass(frozen=True)
class ConvergenceReport:
    orders: tuple
    responses: tuple
    dR: tuple
    dT: tuple
    dA: tuple

    def __iter__(self):
        return iter(zip(self.orders, self.responses))


def convergence_report(stack: Stack, excitation: Excitation, orders) -> ConvergenceReport:
    orders = [int(o) for o in orders]
    if not orders or any(b <= a for a, b in zip(orders, orders[1:])):
        raise ValueError("orders must be a nonempty ascending list")
    responses = [rcwa_response(stack, excitation, HarmonicBasis(o, stack.period)) for o in orders]
    pairs = list(zip(responses, responses[1:]))
    return ConvergenceReport(
        tuple(orders),
        tuple(responses),
        tuple(abs(b.R - a.R) for a, b in pairs),
        tuple(abs(b.T - a.T) for a, b in pairs),
        tuple(abs(b.A - a.A) for a, b in pairs),
    )
