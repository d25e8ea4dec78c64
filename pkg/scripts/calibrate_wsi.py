"""Fit the four coefficients of the linear WSi surrogate used in the reference data.

The optical constants of the sputtered WSi films are not published, so the
surrogate n(lambda) = n0 + dn*u, k(lambda) = k0 + dk*u (u in microns from
1550 nm) is fitted to the design targets of the two nominal devices:

  * single-layer device, TE at 1550 nm, >= 0.98 for ff in [0.58, 0.75]
  * bilayer device, TE >= 0.98 over 1470-1650 nm at ff = 0.611 and 0.75
  * single-layer TE/TM contrast changes sign between 1565 and 1597 nm
  * bilayer mean TE - TM absorbance over 1450-1640 nm in [0.2, 0.38]

The score is the worst normalised margin; Nelder-Mead maximises it. Low
truncation orders keep one evaluation well under a second.

Usage: python3 scripts/calibrate_wsi.py [--start n0,k0,dn,dk] [--maxfev 300]
"""

import argparse

import numpy as np
from scipy.optimize import minimize

from snspd_optics.analysis import absorbance
from snspd_optics.materials import DispersionTable, Material, get_material
from snspd_optics.rcwa import rcwa_response
from snspd_optics.stack import Excitation, build_stack, preset_document

GRID = np.arange(1000.0, 2001.0, 10.0)
N_TE, N_TM = 7, 10
THRESHOLD = 0.9805


def surrogate(params):
    n0, k0, dn, dk = params
    u = (GRID - 1550.0) / 1000.0
    n = np.maximum(n0 + dn * u, 0.1)
    k = np.maximum(k0 + dk * u, 0.01)
    return Material(DispersionTable("wsi", GRID, n, k))


def device(name, wsi, ff=None):
    def resolve(mat):
        return wsi if mat == "wsi" else get_material(mat)

    stack = build_stack(preset_document(name), resolve=resolve)
    return stack if ff is None else stack.with_fill_factor(ff)


def eta(stack, wl, pol="TE"):
    resp = rcwa_response(stack, Excitation(wl, pol), N_TE if pol == "TE" else N_TM)
    return absorbance(resp, stack.absorber_indices())


def margins(params, band_step=30):
    wsi = surrogate(params)
    single = [eta(device("single-device", wsi, ff), 1550.0) for ff in (0.58, 0.75)]
    s = device("single-device", wsi)
    cp = []
    for wl in (1565.0, 1597.0):
        te, tm = eta(s, wl), eta(s, wl, "TM")
        cp.append((te - tm) / (te + tm))
    band = np.arange(1470.0, 1651.0, band_step)
    bil = [min(eta(device("bilayer-device", wsi, ff), wl) for wl in band) for ff in (110 / 180, 0.75)]
    b = device("bilayer-device", wsi)
    gap = np.mean([eta(b, wl) - eta(b, wl, "TM") for wl in np.arange(1450.0, 1641.0, 38.0)])
    m = [
        (min(single) - THRESHOLD) / 0.01,
        (bil[0] - THRESHOLD) / 0.01,
        (bil[1] - THRESHOLD) / 0.01,
        -cp[0] * cp[1] / 5e-4,
        (gap - 0.2) / 0.05,
        (0.38 - gap) / 0.05,
    ]
    return np.array(m), {"single": single, "contrast": cp, "bilayer_min": bil, "te_tm_gap": gap}


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--start", default="4.605,6.327,6.319,-12.549")
    parser.add_argument("--maxfev", type=int, default=300)
    args = parser.parse_args()
    x0 = np.array([float(v) for v in args.start.split(",")])
    print("start", margins(x0)[1])
    simplex = [x0] + [x0 + np.eye(4)[i] * s for i, s in enumerate((0.2, 0.2, 2.0, 2.0))]
    res = minimize(
        lambda p: -margins(p)[0].min(),
        x0,
        method="Nelder-Mead",
        options={"maxfev": args.maxfev, "initial_simplex": np.array(simplex)},
    )
    print("best", ",".join(f"{v:.3f}" for v in res.x), "score", -res.fun)
    print(margins(res.x, band_step=15)[1])


if __name__ == "__main__":
    main()
