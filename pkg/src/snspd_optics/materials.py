"""Tabulated complex refractive-index data and linear interpolation.

Dispersion files are plain CSV with a ``wavelength_nm,n,k`` header and
``#`` comment lines. The reference files shipped in ``data/`` cover
1000-2000 nm; ``SNSPD_MATERIALS_DIR`` points the loader somewhere else.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "DispersionTable",
    "Material",
    "MaterialError",
    "ParseError",
    "ValidationError",
    "RangeError",
    "ResolutionError",
    "load_dispersion",
    "refractive_index",
    "materials_dir",
    "get_material",
    "available_materials",
    "constant_material",
]

MATERIALS_ENV = "SNSPD_MATERIALS_DIR"


class MaterialError(Exception):
    """Base class for material errors."""

    category = "material-error"


class ParseError(MaterialError):
    category = "parse-error"


class ValidationError(MaterialError):
    category = "validation-error"


class RangeError(MaterialError):
    category = "out-of-range"


class ResolutionError(MaterialError):
    category = "unknown-material"


@dataclass(frozen=True)
class DispersionTable:
    name: str
    wavelength: np.ndarray
    n: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelength, dtype=float)
        n = np.asarray(self.n, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if not (wl.ndim == n.ndim == k.ndim == 1 and wl.size == n.size == k.size):
            raise ValidationError(f"{self.name}: columns must be 1D and equal length")
        if wl.size < 2:
            raise ValidationError(f"{self.name}: at least 2 entries required")
        if not np.all(np.isfinite(wl)) or not np.all(np.isfinite(n)) or not np.all(np.isfinite(k)):
            raise ValidationError(f"{self.name}: non-finite values")
        if np.any(np.diff(wl) <= 0):
            raise ValidationError(f"{self.name}: wavelengths must be strictly increasing")
        if np.any(n <= 0):
            raise ValidationError(f"{self.name}: n must be > 0")
        if np.any(k < 0):
            raise ValidationError(f"{self.name}: k must be ≥ 0")
        for arr in (wl, n, k):
            arr.setflags(write=False)
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)

    def __len__(self):
        return self.wavelength.size

    def __eq__(self, other):
        if not isinstance(other, DispersionTable):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.wavelength, other.wavelength)
            and np.array_equal(self.n, other.n)
            and np.array_equal(self.k, other.k)
        )

    def __hash__(self):
        return hash((self.name, self.wavelength.tobytes(), self.n.tobytes(), self.k.tobytes()))


@dataclass(frozen=True, eq=True)
class Material:
    """A dispersive material; ``refractive_index`` interpolates linearly in n and k."""

    table: DispersionTable

    @property
    def name(self) -> str:
        return self.table.name

    @property
    def wavelength_range(self) -> tuple[float, float]:
        return float(self.table.wavelength[0]), float(self.table.wavelength[-1])

    @property
    def lossless(self) -> bool:
        return not np.any(self.table.k > 0)

    def refractive_index(self, wavelength):
        return refractive_index(self, wavelength)

    def permittivity(self, wavelength):
        return refractive_index(self, wavelength) ** 2


def refractive_index(material: Material, wavelength):
    """Complex index n + ik at ``wavelength`` (nm); scalar or array input.

    No extrapolation: wavelengths outside the table raise RangeError.
    """
    table = material.table
    wl = np.asarray(wavelength, dtype=float)
    lo, hi = table.wavelength[0], table.wavelength[-1]
    if np.any(~np.isfinite(wl)) or np.any(wl < lo) or np.any(wl > hi):
        raise RangeError(
            f"{table.name}: wavelength {wavelength} nm outside table range [{lo:g}, {hi:g}] nm"
        )
    # np.interp returns the table entry exactly at grid points
    n = np.interp(wl, table.wavelength, table.n)
    k = np.interp(wl, table.wavelength, table.k)
    out = n + 1j * k
    if out.ndim == 0:
        return complex(out)
    return out


def load_dispersion(path, name: str | None = None) -> Material:
    path = Path(path)
    if name is None:
        name = path.stem
    rows = []
    header_seen = False
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = next(csv.reader([stripped]))
            if not header_seen:
                if [f.strip() for f in fields] != ["wavelength_nm", "n", "k"]:
                    raise ParseError(f"{path}:{lineno}: expected header 'wavelength_nm,n,k'")
                header_seen = True
                continue
            if len(fields) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
            try:
                rows.append(tuple(float(f) for f in fields))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not header_seen:
        raise ParseError(f"{path}: missing header")
    if not rows:
        raise ValidationError(f"{name}: at least 2 entries required")
    data = np.array(rows, dtype=float)
    return Material(DispersionTable(name, data[:, 0], data[:, 1], data[:, 2]))


def constant_material(name: str, index: complex, wl_range=(100.0, 20000.0)) -> Material:
    """Non-dispersive material spanning ``wl_range``; handy for tests and air."""
    index = complex(index)
    return Material(
        DispersionTable(
            name,
            np.array(wl_range, dtype=float),
            np.full(2, index.real),
            np.full(2, index.imag),
        )
    )


def materials_dir() -> Path:
    override = os.environ.get(MATERIALS_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("snspd_optics") / "data"))


def available_materials(directory=None) -> list[str]:
    directory = Path(directory) if directory is not None else materials_dir()
    return sorted(p.stem for p in directory.glob("*.csv"))


@lru_cache(maxsize=None)
def _load_cached(path: str) -> Material:
    return load_dispersion(path)


def get_material(name: str, directory=None) -> Material:
    """Resolve a reference material by name (file stem in the materials directory)."""
    directory = Path(directory) if directory is not None else materials_dir()
    path = directory / f"{name}.csv"
    if not path.is_file():
        raise ResolutionError(f"unknown material {name!r} (looked in {directory})")
    return _load_cached(str(path.resolve()))
