"""Layered device model and the four reference device presets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

from .materials import Material, ValidationError, get_material, refractive_index

__all__ = [
    "UniformLayer",
    "GratingLayer",
    "Stack",
    "Excitation",
    "StackError",
    "UnknownPreset",
    "build_stack",
    "load_stack",
    "serialize_stack",
    "preset",
    "preset_document",
    "PRESETS",
    "quarter_wave_thickness",
    "MIRROR_SIO2_NM",
    "MIRROR_ASI_NM",
]

# mirror quarter-wave layers at 1550 nm
MIRROR_SIO2_NM = 255.2
MIRROR_ASI_NM = 149.1
MIRROR_PAIRS = 6


class StackError(ValidationError):
    category = "invalid-stack"


class UnknownPreset(LookupError):
    category = "unknown-preset"


def _check_thickness(thickness):
    if not (isinstance(thickness, (int, float)) and math.isfinite(thickness) and thickness > 0):
        raise StackError(f"thickness must be positive and finite, got {thickness!r}")


@dataclass(frozen=True)
class UniformLayer:
    material: Material
    thickness: float

    def __post_init__(self):
        _check_thickness(self.thickness)


@dataclass(frozen=True)
class GratingLayer:
    """Lamellar grating layer: one ridge of ``ridge_width`` per ``period``, centred in the cell."""

    ridge_material: Material
    groove_material: Material
    thickness: float
    period: float
    ridge_width: float

    def __post_init__(self):
        _check_thickness(self.thickness)
        if not (math.isfinite(self.period) and self.period > 0):
            raise StackError(f"period must be positive, got {self.period!r}")
        if not (0 < self.ridge_width <= self.period):
            raise StackError(
                f"ridge width must satisfy 0 < w <= period ({self.period}), got {self.ridge_width}"
            )

    @property
    def fill_factor(self) -> float:
        return self.ridge_width / self.period

    @property
    def is_uniform(self) -> bool:
        return self.ridge_width == self.period

    def as_uniform(self) -> UniformLayer:
        return UniformLayer(self.ridge_material, self.thickness)

    def with_fill_factor(self, ff: float) -> "GratingLayer":
        return replace(self, ridge_width=min(ff * self.period, self.period))


Layer = Union[UniformLayer, GratingLayer]


@dataclass(frozen=True)
class Stack:
    """Superstrate / layers (illumination side first) / substrate."""

    superstrate: Material
    layers: tuple
    substrate: Material
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise StackError("a stack needs at least one layer")
        for layer in self.layers:
            if not isinstance(layer, (UniformLayer, GratingLayer)):
                raise StackError(f"not a layer: {layer!r}")
        periods = {l.period for l in self.layers if isinstance(l, GratingLayer)}
        if len(periods) > 1:
            raise StackError(f"all grating layers must share one period, got {sorted(periods)}")

    @property
    def period(self) -> float | None:
        for layer in self.layers:
            if isinstance(layer, GratingLayer):
                return layer.period
        return None

    @property
    def has_grating(self) -> bool:
        return any(isinstance(l, GratingLayer) and not l.is_uniform for l in self.layers)

    @property
    def total_thickness(self) -> float:
        return sum(l.thickness for l in self.layers)

    def planarized(self) -> "Stack":
        """Replace every grating layer with a uniform layer of its ridge material."""
        layers = [l.as_uniform() if isinstance(l, GratingLayer) else l for l in self.layers]
        return replace(self, layers=tuple(layers))

    def with_fill_factor(self, ff: float) -> "Stack":
        layers = [l.with_fill_factor(ff) if isinstance(l, GratingLayer) else l for l in self.layers]
        return replace(self, layers=tuple(layers))

    def reversed(self) -> "Stack":
        return replace(
            self,
            superstrate=self.substrate,
            substrate=self.superstrate,
            layers=tuple(reversed(self.layers)),
        )

    def absorber_indices(self, threshold: float = 0.5) -> list[int]:
        """Indices of layers whose (ridge) material is strongly absorbing (max k above threshold)."""
        out = []
        for i, layer in enumerate(self.layers):
            mat = layer.material if isinstance(layer, UniformLayer) else layer.ridge_material
            if mat.table.k.max() > threshold:
                out.append(i)
        return out


@dataclass(frozen=True)
class Excitation:
    wavelength: float
    polarization: str = "TE"
    angle: float = 0.0

    def __post_init__(self):
        pol = str(self.polarization).upper()
        if pol not in ("TE", "TM"):
            raise ValidationError(f"polarization must be TE or TM, got {self.polarization!r}")
        object.__setattr__(self, "polarization", pol)
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise ValidationError(f"wavelength must be positive, got {self.wavelength!r}")
        if not (0 <= self.angle < 90):
            raise ValidationError(f"incidence angle must lie in [0, 90), got {self.angle!r}")


# --- serialization ---------------------------------------------------------------


def build_stack(doc: dict, resolve=None) -> Stack:
    """Build a validated Stack from a stack JSON document (already parsed)."""
    if resolve is None:
        resolve = get_material
    try:
        superstrate = resolve(doc["superstrate"])
        substrate = resolve(doc["substrate"])
        period = doc.get("period_nm")
        layers = []
        for i, item in enumerate(doc["layers"]):
            kind = item.get("type")
            if kind == "uniform":
                layers.append(UniformLayer(resolve(item["material"]), float(item["thickness_nm"])))
            elif kind == "grating":
                if period is None:
                    raise StackError(f"layer {i}: grating layer requires period_nm")
                layers.append(
                    GratingLayer(
                        resolve(item["ridge"]),
                        resolve(item["groove"]),
                        float(item["thickness_nm"]),
                        float(period),
                        float(item["ridge_width_nm"]),
                    )
                )
            else:
                raise StackError(f"layer {i}: unknown layer type {kind!r}")
    except KeyError as exc:
        raise StackError(f"stack document missing field {exc}") from None
    return Stack(superstrate, tuple(layers), substrate, name=doc.get("name", ""))


def serialize_stack(stack: Stack) -> dict:
    layers = []
    for layer in stack.layers:
        if isinstance(layer, UniformLayer):
            layers.append(
                {"type": "uniform", "material": layer.material.name, "thickness_nm": layer.thickness}
            )
        else:
            layers.append(
                {
                    "type": "grating",
                    "ridge": layer.ridge_material.name,
                    "groove": layer.groove_material.name,
                    "thickness_nm": layer.thickness,
                    "ridge_width_nm": layer.ridge_width,
                }
            )
    doc = {
        "superstrate": stack.superstrate.name,
        "substrate": stack.substrate.name,
        "period_nm": stack.period,
        "layers": layers,
    }
    if stack.name:
        doc["name"] = stack.name
    return doc


def load_stack(source: str) -> Stack:
    """Preset name or path to a stack JSON file."""
    if source in PRESETS:
        return preset(source)
    path = Path(source)
    if path.suffix.lower() == ".json" or path.exists():
        if not path.is_file():
            raise StackError(f"stack file not found: {source}")
        with path.open(encoding="utf-8") as fh:
            return build_stack(json.load(fh))
    raise UnknownPreset(f"unknown preset {source!r}; choose from {', '.join(PRESETS)}")


# --- presets ---------------------------------------------------------------------


def _mirror_layers():
    layers = []
    for _ in range(MIRROR_PAIRS):
        layers.append({"type": "uniform", "material": "sio2", "thickness_nm": MIRROR_SIO2_NM})
        layers.append({"type": "uniform", "material": "asi", "thickness_nm": MIRROR_ASI_NM})
    layers.append({"type": "uniform", "material": "sio2", "thickness_nm": MIRROR_SIO2_NM})
    return layers


def _uniform(material, thickness):
    return {"type": "uniform", "material": material, "thickness_nm": thickness}


def _grating(ridge, groove, thickness, width):
    return {
        "type": "grating",
        "ridge": ridge,
        "groove": groove,
        "thickness_nm": thickness,
        "ridge_width_nm": width,
    }


def _doc(name, layers, period=None):
    return {
        "name": name,
        "superstrate": "air",
        "substrate": "si",
        "period_nm": period,
        "layers": layers,
    }


# Layers run from the illumination side down. ARC layers are listed top first;
# the first-deposited ARC layer sits on the absorber and fills the grating grooves.
_SINGLE_ARC = [_uniform("sio2", 154.0), _uniform("asi", 173.0), _uniform("sio2", 223.0)]
_BILAYER_ARC = [
    _uniform("asi", 45.0),
    _uniform("sio2", 100.0),
    _uniform("asi", 145.0),
    _uniform("sio2", 222.0),
]


def preset_document(name: str) -> dict:
    if name == "mirror13":
        return _doc(name, _mirror_layers())
    if name == "single-planar":
        return _doc(name, [_uniform("sio2", 5.1), _uniform("wsi", 3.5)] + _mirror_layers())
    if name == "single-device":
        absorber = [_grating("sio2", "sio2", 5.1, 140.0), _grating("wsi", "sio2", 3.5, 140.0)]
        return _doc(name, _SINGLE_ARC + absorber + _mirror_layers(), period=220.0)
    if name == "bilayer-device":
        absorber = [
            _grating("asi", "sio2", 2.5, 110.0),
            _grating("wsi", "sio2", 3.3, 110.0),
            _grating("asi", "sio2", 4.0, 110.0),
            _grating("wsi", "sio2", 3.3, 110.0),
        ]
        return _doc(name, _BILAYER_ARC + absorber + _mirror_layers(), period=180.0)
    raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("mirror13", "single-planar", "single-device", "bilayer-device")


def preset(name: str) -> Stack:
    return build_stack(preset_document(name))


def quarter_wave_thickness(material: Material, design_wavelength: float) -> float:
    n = refractive_index(material, design_wavelength)
    return design_wavelength / (4.0 * n.real)
