"""Derived quantities and parameter studies built on the solvers."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .rcwa import HarmonicBasis, rcwa_response
from .stack import Excitation, Stack, StackError, UniformLayer
from .tmm import OpticalResponse

__all__ = [
    "DomainError",
    "OptimizationError",
    "FillFactorMap",
    "PolContrastMap",
    "DesignObjective",
    "ArcOptimization",
    "absorbance",
    "fill_factor",
    "fill_factor_map",
    "pol_contrast",
    "pol_contrast_map",
    "predicted_sde",
    "optimize_arc",
    "absorber_efficiency",
    "parallel_map",
    "DEFAULT_LOSS",
]

# wavelength-independent loss between modelled absorbance and measured SDE
DEFAULT_LOSS = 0.075


class DomainError(ValueError):
    category = "domain-error"


class OptimizationError(RuntimeError):
    category = "optimization-error"


def parallel_map(fn, items, jobs: int | None = 1):
    """Ordered map; ``jobs`` > 1 fans out over processes. Results never depend on ``jobs``."""
    items = list(items)
    if not jobs or jobs <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def absorbance(response: OpticalResponse, absorber_layers) -> float:
    """Sum of per-layer absorbance over ``absorber_layers`` (the optical absorption efficiency)."""
    n = len(response.absorbance_per_layer)
    total = 0.0
    for i in absorber_layers:
        if not 0 <= i < n:
            raise DomainError(f"absorber layer index {i} out of range for {n} layers")
        total += response.absorbance_per_layer[i]
    return total


def absorber_efficiency(stack: Stack, wavelength: float, polarization: str = "TE", basis=15) -> float:
    """eta_abs of ``stack`` at one wavelength; absorbers are the strongly absorbing layers."""
    resp = rcwa_response(stack, Excitation(wavelength, polarization), basis)
    return absorbance(resp, stack.absorber_indices())


def fill_factor(w: float, g: float) -> float:
    if not (w > 0 and math.isfinite(w)):
        raise DomainError(f"wire width must be positive, got {w!r}")
    if not (g >= 0 and math.isfinite(g)):
        raise DomainError(f"gap must be non-negative, got {g!r}")
    return w / (w + g)


def pol_contrast(eta_te: float, eta_tm: float) -> float:
    """(eta_TE - eta_TM) / (eta_TE + eta_TM)."""
    total = eta_te + eta_tm
    if total == 0:
        raise DomainError("polarization contrast undefined when both efficiencies vanish")
    return (eta_te - eta_tm) / total


def predicted_sde(eta_abs: float, loss_fraction: float = DEFAULT_LOSS) -> float:
    if not 0.0 <= eta_abs <= 1.0:
        raise DomainError(f"absorbance must lie in [0, 1], got {eta_abs!r}")
    if not 0.0 <= loss_fraction < 1.0:
        raise DomainError(f"loss fraction must lie in [0, 1), got {loss_fraction!r}")
    return (1.0 - loss_fraction) * eta_abs


# --- maps ------------------------------------------------------------------------


@dataclass(frozen=True)
class FillFactorMap:
    wavelengths: np.ndarray
    fill_factors: np.ndarray
    values: np.ndarray  # shape (len(wavelengths), len(fill_factors))
    polarization: str

    def __post_init__(self):
        if self.values.shape != (len(self.wavelengths), len(self.fill_factors)):
            raise ValueError("map values do not match the grids")


@dataclass(frozen=True)
class PolContrastMap:
    wavelengths: np.ndarray
    fill_factors: np.ndarray
    values: np.ndarray


def _check_grid(ff_grid, wl_grid):
    ff_grid = np.atleast_1d(np.asarray(ff_grid, dtype=float))
    wl_grid = np.atleast_1d(np.asarray(wl_grid, dtype=float))
    if ff_grid.size == 0 or wl_grid.size == 0:
        raise DomainError("fill-factor and wavelength grids must be nonempty")
    if np.any(ff_grid <= 0) or np.any(ff_grid > 1):
        raise DomainError("fill factors must lie in (0, 1]")
    return ff_grid, wl_grid


def _map_cell(args):
    stack, ff, wl, pol, basis = args
    s = stack.with_fill_factor(ff)
    try:
        return absorber_efficiency(s, wl, pol, basis)
    except Exception as exc:  # attach grid coordinates
        raise type(exc)(f"{exc} [fill factor {ff:g}, wavelength {wl:g} nm]") from exc


def _eta_grid(stack, ff_grid, wl_grid, pol, basis, jobs):
    cells = [(stack, ff, wl, pol, basis) for wl in wl_grid for ff in ff_grid]
    vals = parallel_map(_map_cell, cells, jobs)
    return np.array(vals).reshape(wl_grid.size, ff_grid.size)


def _require_grating(stack):
    if stack.period is None:
        raise StackError("fill-factor studies need a stack with at least one grating layer")


def fill_factor_map(
    stack_template: Stack, ff_grid, wl_grid, polarization="TE", basis=15, jobs=1
) -> FillFactorMap:
    """eta_abs over (wavelength, fill factor); every grating ridge is rescaled to ff * period."""
    _require_grating(stack_template)
    ff_grid, wl_grid = _check_grid(ff_grid, wl_grid)
    vals = _eta_grid(stack_template, ff_grid, wl_grid, polarization.upper(), basis, jobs)
    return FillFactorMap(wl_grid, ff_grid, vals, polarization.upper())


def pol_contrast_map(stack_template: Stack, ff_grid, wl_grid, basis=15, jobs=1) -> PolContrastMap:
    _require_grating(stack_template)
    ff_grid, wl_grid = _check_grid(ff_grid, wl_grid)
    te = _eta_grid(stack_template, ff_grid, wl_grid, "TE", basis, jobs)
    tm = _eta_grid(stack_template, ff_grid, wl_grid, "TM", basis, jobs)
    total = te + tm
    if np.any(total == 0):
        raise DomainError("polarization contrast undefined where both efficiencies vanish")
    return PolContrastMap(wl_grid, ff_grid, (te - tm) / total)


# --- ARC optimisation ------------------------------------------------------------


@dataclass(frozen=True)
class DesignObjective:
    """Maximise the worst-case absorbance over ``band``.

    ``metric`` is ``"te"`` (TE absorbance) or ``"mean"`` (mean of TE and TM).
    ``variable_layers`` maps layer index -> (lower, upper) thickness bounds in nm.
    """

    band: tuple
    variable_layers: dict
    metric: str = "te"
    band_step: float = 10.0

    def __post_init__(self):
        lo, hi = self.band
        if not lo < hi:
            raise DomainError(f"band must satisfy lo < hi, got {self.band}")
        if self.metric not in ("te", "mean"):
            raise DomainError(f"metric must be 'te' or 'mean', got {self.metric!r}")
        if not self.variable_layers:
            raise DomainError("no variable layers given")
        for idx, (a, b) in self.variable_layers.items():
            if not 0 < a <= b:
                raise DomainError(f"layer {idx}: bounds must satisfy 0 < lo <= hi, got {(a, b)}")

    @property
    def wavelengths(self) -> np.ndarray:
        lo, hi = self.band
        n = int(round((hi - lo) / self.band_step))
        return np.linspace(lo, hi, max(n, 1) + 1)

    def evaluate(self, stack: Stack, basis=15) -> float:
        pols = ("TE",) if self.metric == "te" else ("TE", "TM")
        worst = math.inf
        for wl in self.wavelengths:
            val = np.mean([absorber_efficiency(stack, float(wl), p, basis) for p in pols])
            worst = min(worst, float(val))
        return worst


@dataclass
class ArcOptimization:
    thicknesses: dict
    objective: float
    start_objective: float
    trace: list = field(default_factory=list)
    stack: Stack | None = None

    @property
    def evaluations(self) -> int:
        return len(self.trace)


class _BudgetExhausted(Exception):
    pass


def _with_thicknesses(stack: Stack, indices, values) -> Stack:
    layers = list(stack.layers)
    for i, t in zip(indices, values):
        layers[i] = replace(layers[i], thickness=float(t))
    return replace(stack, layers=tuple(layers))


def optimize_arc(
    stack: Stack,
    objective: DesignObjective,
    basis=15,
    budget: int = 200,
    restarts: int = 2,
    seed: int = 0,
) -> ArcOptimization:
    """Bounded Nelder-Mead on the variable layer thicknesses, with seeded random restarts.

    Returns the best point visited; the starting thicknesses are always the
    first evaluation, so the result is never worse than the start.
    """
    indices = sorted(objective.variable_layers)
    for i in indices:
        if not 0 <= i < len(stack.layers):
            raise DomainError(f"variable layer index {i} out of range")
        if not isinstance(stack.layers[i], UniformLayer):
            raise DomainError(f"variable layer {i} must be a uniform layer")
    lo = np.array([objective.variable_layers[i][0] for i in indices], dtype=float)
    hi = np.array([objective.variable_layers[i][1] for i in indices], dtype=float)
    start = np.clip([stack.layers[i].thickness for i in indices], lo, hi)

    trace = []
    best = {"x": None, "f": -math.inf}

    def evaluate(x):
        if len(trace) >= budget:
            raise _BudgetExhausted
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        try:
            val = objective.evaluate(_with_thicknesses(stack, indices, x), basis)
        except Exception:
            val = None
        trace.append({"thicknesses_nm": [float(v) for v in x], "objective": val})
        if val is None:
            return math.inf
        if val > best["f"]:
            best["x"], best["f"] = x.copy(), val
        return -val

    rng = np.random.default_rng(seed)
    starts = [start] + [lo + (hi - lo) * rng.random(lo.size) for _ in range(restarts)]
    span = np.where(hi > lo, hi - lo, 1.0)
    start_value = None
    try:
        for x0 in starts:
            # initial simplex scaled to a fifth of each bound interval
            simplex = [x0] + [np.clip(x0 + np.eye(lo.size)[j] * 0.2 * span[j], lo, hi) for j in range(lo.size)]
            for j in range(1, len(simplex)):
                if np.allclose(simplex[j], x0):
                    simplex[j] = np.clip(x0 - np.eye(lo.size)[j - 1] * 0.2 * span[j - 1], lo, hi)
            minimize(
                evaluate,
                x0,
                method="Nelder-Mead",
                bounds=list(zip(lo, hi)),
                options={"initial_simplex": np.array(simplex), "xatol": 0.05, "fatol": 1e-6},
            )
            if start_value is None:
                start_value = trace[0]["objective"]
    except _BudgetExhausted:
        pass
    if start_value is None and trace:
        start_value = trace[0]["objective"]
    if best["x"] is None:
        raise OptimizationError(f"no feasible evaluation within a budget of {budget}")
    thick = {i: float(t) for i, t in zip(indices, best["x"])}
    return ArcOptimization(
        thicknesses=thick,
        objective=best["f"],
        start_objective=start_value if start_value is not None else math.nan,
        trace=trace,
        stack=_with_thicknesses(stack, indices, best["x"]),
    )
