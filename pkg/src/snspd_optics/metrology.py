"""System detection efficiency from calibrated power and count-rate readings.

The chain: power-meter readings are offset-subtracted and divided by their
correction factors, three attenuation factors are measured as ratios against
the unattenuated power, and the photon flux at the fibre input follows from
the attenuated power, the switching ratio and the photon energy. Relative
uncertainties combine in quadrature, each source counted once.

Also: Stokes parameters from six totalised polarization settings and the
polarization state that maximises the count rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

__all__ = [
    "MetrologyError",
    "MeasurementInvalid",
    "NegativeSignal",
    "DegenerateInput",
    "Unpolarized",
    "Quantity",
    "PowerReading",
    "RatioReading",
    "MeasurementRecord",
    "UncertaintyBudget",
    "StokesCounts",
    "PolarizationSolution",
    "photon_energy",
    "corrected_power",
    "attenuation_factor",
    "input_flux",
    "sde",
    "budget",
    "stokes_from_counts",
    "optimal_polarization",
    "k_rule_angle",
    "counts_for_state",
    "synthesize_measurement",
    "record_to_dict",
    "record_from_dict",
    "load_record",
    "save_record",
]


class MetrologyError(ValueError):
    category = "metrology-error"


class MeasurementInvalid(MetrologyError):
    category = "measurement-invalid"


class NegativeSignal(MetrologyError):
    category = "negative-signal"


class DegenerateInput(MetrologyError):
    category = "degenerate-input"


class Unpolarized(MetrologyError):
    category = "unpolarized"


@dataclass(frozen=True)
class Quantity:
    value: float
    rel_uncertainty: float

    @property
    def abs_uncertainty(self) -> float:
        return abs(self.value) * self.rel_uncertainty


def _quadrature(values) -> float:
    return math.sqrt(math.fsum(v * v for v in values))


# --- records ---------------------------------------------------------------------


@dataclass(frozen=True)
class PowerReading:
    read_power: float
    offset_power: float = 0.0
    cf_cal: float = 1.0
    cf_nl: float = 1.0
    cf_rd: float = 1.0
    rel_uncertainty: float = 0.0

    def __post_init__(self):
        for name in ("cf_cal", "cf_nl", "cf_rd"):
            if not getattr(self, name) > 0:
                raise MeasurementInvalid(f"correction factor {name} must be positive")
        if not self.rel_uncertainty >= 0:
            raise MeasurementInvalid("relative uncertainty must be non-negative")

    def scaled(self, s: float) -> "PowerReading":
        return PowerReading(
            self.read_power * s, self.offset_power * s, self.cf_cal, self.cf_nl, self.cf_rd, self.rel_uncertainty
        )


@dataclass(frozen=True)
class RatioReading:
    value: float
    rel_uncertainty: float = 0.0


@dataclass(frozen=True)
class MeasurementRecord:
    """One SDE measurement at one wavelength.

    ``integration_time_s`` sets the Poisson variance of the count rate
    (counts = rate * time); it defaults to one second.
    """

    wavelength: float
    cr: float
    sdcr_samples: tuple
    unattenuated: PowerReading
    attenuators: tuple
    r_sw: RatioReading
    r_f: float = 0.0
    integration_time_s: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sdcr_samples", tuple(float(v) for v in self.sdcr_samples))
        object.__setattr__(self, "attenuators", tuple(self.attenuators))
        if not self.wavelength > 0:
            raise MeasurementInvalid(f"wavelength must be positive, got {self.wavelength}")
        if not self.cr >= 0:
            raise MeasurementInvalid(f"count rate must be non-negative, got {self.cr}")
        if any(v < 0 for v in self.sdcr_samples):
            raise MeasurementInvalid("dark count samples must be non-negative")
        if len(self.attenuators) != 3:
            raise MeasurementInvalid(f"exactly 3 attenuator readings required, got {len(self.attenuators)}")
        if not 0 <= self.r_f < 1:
            raise MeasurementInvalid(f"fibre reflectance must lie in [0, 1), got {self.r_f}")
        if not self.integration_time_s > 0:
            raise MeasurementInvalid("integration time must be positive")

    @property
    def mean_sdcr(self) -> float:
        return float(np.mean(self.sdcr_samples)) if self.sdcr_samples else 0.0

    @property
    def sdcr_std_error(self) -> float:
        n = len(self.sdcr_samples)
        if n < 2:
            return 0.0
        return float(np.std(self.sdcr_samples, ddof=1) / math.sqrt(n))


@dataclass(frozen=True)
class UncertaintyBudget:
    components: tuple  # ((name, relative uncertainty), ...)
    combined: float

    @classmethod
    def from_components(cls, components) -> "UncertaintyBudget":
        items = tuple((str(k), float(v)) for k, v in (components.items() if isinstance(components, dict) else components))
        return cls(items, _quadrature(v for _, v in items))

    def as_dict(self) -> dict:
        return {
            "components": [{"name": k, "value_percent": 100 * v} for k, v in self.components],
            "combined_percent": 100 * self.combined,
        }


# --- calibration chain -----------------------------------------------------------


def photon_energy(wavelength_nm: float) -> float:
    return PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)


def corrected_power(reading: PowerReading) -> Quantity:
    p = (reading.read_power - reading.offset_power) / (reading.cf_cal * reading.cf_nl * reading.cf_rd)
    if not p > 0:
        raise MeasurementInvalid(f"corrected power must be positive, got {p:g} W")
    return Quantity(p, reading.rel_uncertainty)


def attenuation_factor(attenuated: PowerReading, unattenuated_corrected) -> Quantity:
    """Pure power ratio (no dB conversion); ``unattenuated_corrected`` is a Quantity or watts."""
    if not isinstance(unattenuated_corrected, Quantity):
        unattenuated_corrected = Quantity(float(unattenuated_corrected), 0.0)
    if not unattenuated_corrected.value > 0:
        raise MeasurementInvalid("unattenuated power must be positive")
    pa = corrected_power(attenuated)
    return Quantity(
        pa.value / unattenuated_corrected.value,
        _quadrature([pa.rel_uncertainty, unattenuated_corrected.rel_uncertainty]),
    )


def _flux_components(record: MeasurementRecord):
    p = corrected_power(record.unattenuated)
    alphas = [attenuation_factor(a, p) for a in record.attenuators]
    comps = [("P", p.rel_uncertainty)]
    comps += [(f"alpha_{i + 1}", a.rel_uncertainty) for i, a in enumerate(alphas)]
    comps.append(("r_SW", record.r_sw.rel_uncertainty))
    return p, alphas, comps


def input_flux(record: MeasurementRecord) -> Quantity:
    """Photon flux at the fibre input (photons/s)."""
    p, alphas, comps = _flux_components(record)
    power = p.value * math.prod(a.value for a in alphas) * record.r_sw.value
    f = power / ((1.0 - record.r_f) * photon_energy(record.wavelength))
    if not f > 0:
        raise MeasurementInvalid(f"photon flux must be positive, got {f:g}")
    return Quantity(f, _quadrature(v for _, v in comps))


def _pcr(record: MeasurementRecord):
    pcr = record.cr - record.mean_sdcr
    if -1e-12 * record.cr <= pcr < 0:  # averaging round-off when CR equals the dark rate
        pcr = 0.0
    if pcr < 0:
        raise NegativeSignal(f"count rate {record.cr:g} below mean dark rate {record.mean_sdcr:g}")
    var = record.cr / record.integration_time_s + record.sdcr_std_error**2
    rel = math.sqrt(var) / pcr if pcr > 0 else 0.0
    return pcr, rel


def budget(record: MeasurementRecord) -> UncertaintyBudget:
    _, _, comps = _flux_components(record)
    _, rel_pcr = _pcr(record)
    return UncertaintyBudget.from_components([("PCR", rel_pcr)] + comps)


def sde(record: MeasurementRecord) -> tuple[float, float]:
    """(SDE, absolute uncertainty)."""
    flux = input_flux(record)
    pcr, _ = _pcr(record)
    value = pcr / flux.value
    return value, value * budget(record).combined


# --- polarization ----------------------------------------------------------------


@dataclass(frozen=True)
class StokesCounts:
    n_h: float
    n_v: float
    n_d: float
    n_a: float
    n_rhc: float
    n_lhc: float

    def __post_init__(self):
        if any(v < 0 for v in asdict(self).values()):
            raise DegenerateInput("counts must be non-negative")


@dataclass(frozen=True)
class PolarizationSolution:
    p: float
    psi: float
    chi: float
    clamped: bool = False


def stokes_from_counts(counts: StokesCounts) -> tuple[float, float, float, float]:
    vals = asdict(counts).values()
    if not any(vals):
        raise DegenerateInput("all counts are zero")
    s0 = (counts.n_h + counts.n_v + counts.n_d + counts.n_a + counts.n_rhc + counts.n_lhc) / 3
    return s0, counts.n_h - counts.n_v, counts.n_d - counts.n_a, counts.n_rhc - counts.n_lhc


def k_rule_angle(s1: float, s2: float) -> float:
    """Half angle from the single-argument arctangent with the k-branch shift.

    Agrees with ``optimal_polarization`` whenever S2 > 0; for S2 < 0 it lands
    on the orthogonal linear axis. Kept for comparison only.
    """
    half = 0.5 * math.atan(s2 / s1) if s1 != 0 else math.copysign(math.pi / 4, s2)
    return half + (math.pi / 2 if half < 0 else 0.0)


def optimal_polarization(s0: float, s1: float, s2: float, s3: float) -> PolarizationSolution:
    if not s0 > 0:
        raise DegenerateInput(f"S0 must be positive, got {s0}")
    lin = math.hypot(s1, s2)
    if lin == 0 and s3 == 0:
        raise Unpolarized("S1 = S2 = S3 = 0: no preferred polarization state")
    p = math.sqrt(s1 * s1 + s2 * s2 + s3 * s3) / s0
    clamped = p > 1
    psi = (0.5 * math.atan2(s2, s1)) % math.pi if lin > 0 else 0.0
    if psi >= math.pi:
        psi = 0.0
    chi = 0.5 * math.atan2(s3, lin)
    return PolarizationSolution(min(p, 1.0), psi, chi, clamped)


def counts_for_state(total: float, psi: float, chi: float, p: float = 1.0) -> StokesCounts:
    """Ideal counts for a state; ``total`` is S0 (counts per basis pair)."""
    s1 = p * math.cos(2 * chi) * math.cos(2 * psi)
    s2 = p * math.cos(2 * chi) * math.sin(2 * psi)
    s3 = p * math.sin(2 * chi)
    h = total / 2
    return StokesCounts(h * (1 + s1), h * (1 - s1), h * (1 + s2), h * (1 - s2), h * (1 + s3), h * (1 - s3))


# --- synthetic records and I/O ---------------------------------------------------


def synthesize_measurement(
    true_sde: float,
    flux_setting: float,
    dark_rate: float,
    noise: str = "none",
    seed: int | None = None,
    wavelength: float = 1550.0,
    integration_time_s: float = 1.0,
    dark_samples: int = 10,
) -> MeasurementRecord:
    """A self-consistent record whose SDE is ``true_sde`` (exactly when noise='none')."""
    if not 0 <= true_sde <= 1:
        raise MetrologyError("true SDE must lie in [0, 1]")
    if not flux_setting > 0 or not dark_rate >= 0:
        raise MetrologyError("flux must be positive and dark rate non-negative")
    if noise not in ("none", "poisson"):
        raise MetrologyError(f"noise must be 'none' or 'poisson', got {noise!r}")
    alphas = (10 ** (-3.16), 10 ** (-3.13), 10 ** (-3.19))
    r_sw, r_f = 0.52, 0.035
    cfs = (0.98, 1.01, 1.0)
    cf = math.prod(cfs)
    offset = 2e-12
    p_real = flux_setting * (1 - r_f) * photon_energy(wavelength) / (math.prod(alphas) * r_sw)
    unatt = PowerReading(p_real * cf + offset, offset, *cfs, rel_uncertainty=0.0039)
    atts = tuple(PowerReading(a * p_real * cf + offset, offset, *cfs, rel_uncertainty=0.0039) for a in alphas)
    # recompute from the stored readings so the forward model sees identical numbers
    probe = MeasurementRecord(wavelength, 0.0, (), unatt, atts, RatioReading(r_sw, 0.0053), r_f, integration_time_s)
    flux = input_flux(probe).value
    cr = true_sde * flux + dark_rate
    samples = (dark_rate,) * dark_samples
    if noise == "poisson":
        rng = np.random.default_rng(seed)
        t = integration_time_s
        cr = rng.poisson(cr * t) / t
        samples = tuple(float(v) for v in rng.poisson(dark_rate * t, size=dark_samples) / t)
    return MeasurementRecord(
        wavelength, float(cr), samples, unatt, atts, RatioReading(r_sw, 0.0053), r_f, integration_time_s
    )


def _reading_to_dict(r: PowerReading) -> dict:
    return {
        "read_w": r.read_power,
        "offset_w": r.offset_power,
        "cf_cal": r.cf_cal,
        "cf_nl": r.cf_nl,
        "cf_rd": r.cf_rd,
        "rel_u": r.rel_uncertainty,
    }


def _reading_from_dict(d: dict) -> PowerReading:
    return PowerReading(
        float(d["read_w"]),
        float(d.get("offset_w", 0.0)),
        float(d.get("cf_cal", 1.0)),
        float(d.get("cf_nl", 1.0)),
        float(d.get("cf_rd", 1.0)),
        float(d.get("rel_u", 0.0)),
    )


def record_to_dict(record: MeasurementRecord) -> dict:
    return {
        "wavelength_nm": record.wavelength,
        "cr_hz": record.cr,
        "sdcr_samples_hz": list(record.sdcr_samples),
        "unattenuated": _reading_to_dict(record.unattenuated),
        "attenuators": [_reading_to_dict(a) for a in record.attenuators],
        "r_sw": {"value": record.r_sw.value, "rel_u": record.r_sw.rel_uncertainty},
        "r_f": record.r_f,
        "integration_time_s": record.integration_time_s,
    }


def record_from_dict(doc: dict) -> MeasurementRecord:
    try:
        return MeasurementRecord(
            wavelength=float(doc["wavelength_nm"]),
            cr=float(doc["cr_hz"]),
            sdcr_samples=tuple(float(v) for v in doc.get("sdcr_samples_hz", [])),
            unattenuated=_reading_from_dict(doc["unattenuated"]),
            attenuators=tuple(_reading_from_dict(a) for a in doc["attenuators"]),
            r_sw=RatioReading(float(doc["r_sw"]["value"]), float(doc["r_sw"].get("rel_u", 0.0))),
            r_f=float(doc.get("r_f", 0.0)),
            integration_time_s=float(doc.get("integration_time_s", 1.0)),
        )
    except (KeyError, TypeError) as exc:
        raise MeasurementInvalid(f"measurement record missing or malformed field: {exc}") from None


def load_record(path) -> MeasurementRecord:
    with open(path, encoding="utf-8") as fh:
        return record_from_dict(json.load(fh))


def save_record(record: MeasurementRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record_to_dict(record), fh, indent=2)
        fh.write("\n")
