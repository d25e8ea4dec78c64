import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from snspd_optics.materials import RangeError, constant_material, get_material
from snspd_optics.stack import Excitation, GratingLayer, Stack, UniformLayer, preset
from snspd_optics.tmm import UnsupportedStackError, spectral_sweep, tmm_response, wavelength_grid

AIR = constant_material("air", 1.0)


def abeles(n_sup, layers, n_sub, wl, angle=0.0, pol="TE"):
    """Characteristic-matrix oracle: R, T for (index, thickness) layers."""
    kx = n_sup * np.sin(np.radians(angle))

    def adm(n):
        kz = np.sqrt(complex(n * n - kx * kx))
        if kz.imag < 0:
            kz = -kz
        return kz, (kz if pol == "TE" else kz / (n * n))

    _, e0 = adm(n_sup)
    _, es = adm(n_sub)
    M = np.eye(2, dtype=complex)
    for n, d in layers:
        kz, e = adm(n)
        delta = 2 * np.pi / wl * kz * d
        M = M @ np.array([[np.cos(delta), -1j * np.sin(delta) / e], [-1j * e * np.sin(delta), np.cos(delta)]])
    den = e0 * M[0, 0] + e0 * es * M[0, 1] + M[1, 0] + es * M[1, 1]
    r = (e0 * M[0, 0] + e0 * es * M[0, 1] - M[1, 0] - es * M[1, 1]) / den
    t = 2 * e0 / den
    return abs(r) ** 2, (es.real / e0.real) * abs(t) ** 2


def make(layers, sup=1.0, sub=1.5):
    return Stack(
        constant_material("sup", sup),
        tuple(UniformLayer(constant_material(f"m{i}", n), d) for i, (n, d) in enumerate(layers)),
        constant_material("sub", sub),
    )


def test_fresnel_interface():
    r = tmm_response(make([(1.0, 100.0)]), Excitation(1550))
    assert r.R == pytest.approx(0.04, abs=1e-15)
    assert r.T == pytest.approx(0.96, abs=1e-15)
    assert r.A == pytest.approx(0.0, abs=1e-15)


def test_vacuum_sweep():
    # a single air layer between air half-spaces is physically the empty stack
    stack = Stack(AIR, (UniformLayer(AIR, 500.0),), AIR)
    for _, r in spectral_sweep(stack, 1300, 1800, 50):
        assert r.R == pytest.approx(0, abs=1e-15)
        assert r.T == pytest.approx(1, abs=1e-15)


def test_mirror_sweep():
    sweep = spectral_sweep(preset("mirror13"), 1350, 1800, 5)
    assert len(sweep) == 91
    assert sweep[0][0] == 1350 and sweep[-1][0] == 1800
    assert min(r.R for _, r in sweep) >= 0.97


def test_sweep_equals_pointwise():
    s = preset("single-planar")
    for wl, r in spectral_sweep(s, 1400, 1700, 37.5, "TM"):
        assert r == tmm_response(s, Excitation(wl, "TM"))


def test_grid_truncates_at_stop():
    np.testing.assert_allclose(wavelength_grid(1400, 1410, 3), [1400, 1403, 1406, 1409])
    assert len(wavelength_grid(1350, 1800, 1)) == 451


def test_grating_rejected():
    sio2, wsi = get_material("sio2"), get_material("wsi")
    s = Stack(AIR, (GratingLayer(wsi, sio2, 3.5, 220, 140),), get_material("si"))
    with pytest.raises(UnsupportedStackError):
        tmm_response(s, Excitation(1550))


def test_range_error_propagates():
    with pytest.raises(RangeError):
        tmm_response(preset("single-planar"), Excitation(1900))


def test_lossless_layers_absorb_nothing():
    s = preset("single-planar")
    r = tmm_response(s, Excitation(1562))
    lossless = [i for i, l in enumerate(s.layers) if l.material.lossless]
    assert len(lossless) == 8  # cap and mirror SiO2; the alpha-Si tail absorbs weakly
    for i in lossless:
        assert abs(r.absorbance_per_layer[i]) < 1e-10
    assert r.A == pytest.approx(sum(r.absorbance_per_layer), abs=1e-12)
    assert r.R + r.T + r.A == pytest.approx(1, abs=1e-12)


def test_thick_stack_is_stable():
    # 40 um of lossy material: transmission underflows gracefully, no overflow
    s = make([(3.0 + 0.5j, 10000.0)] * 4, sub=3.5)
    r = tmm_response(s, Excitation(1550))
    assert np.isfinite(r.R) and 0 <= r.T < 1e-60
    assert r.R + r.T + r.A == pytest.approx(1, abs=1e-12)


layer = st.tuples(st.floats(1.2, 4.0), st.floats(0.0, 3.0), st.floats(1.0, 400.0))


@given(
    st.lists(layer, min_size=1, max_size=6),
    st.floats(1000, 2000),
    st.floats(0, 80),
    st.sampled_from(["TE", "TM"]),
)
def test_matches_characteristic_matrix(layers, wl, angle, pol):
    spec = [(n + 1j * k, d) for n, k, d in layers]
    R, T = abeles(1.0, spec, 1.5, wl, angle, pol)
    r = tmm_response(make(spec), Excitation(wl, pol, angle))
    assert r.R == pytest.approx(R, abs=1e-9)
    assert r.T == pytest.approx(T, abs=1e-9)
    assert r.R + r.T + r.A == pytest.approx(1, abs=1e-9)
    assert all(a >= -1e-12 for a in r.absorbance_per_layer)


@given(st.lists(st.tuples(st.floats(1.0, 4.0), st.floats(1.0, 500.0)), min_size=1, max_size=8), st.floats(1000, 2000))
def test_lossless_energy_conservation(layers, wl):
    r = tmm_response(make(layers), Excitation(wl))
    assert abs(r.R + r.T - 1) <= 1e-10


@given(st.lists(layer, min_size=1, max_size=6), st.floats(1000, 2000))
def test_reciprocity(layers, wl):
    s = make([(n + 1j * k, d) for n, k, d in layers], sup=1.0, sub=1.5)
    assert tmm_response(s.reversed(), Excitation(wl)).T == pytest.approx(tmm_response(s, Excitation(wl)).T, abs=1e-9)


@given(st.lists(layer, min_size=1, max_size=6), st.floats(1000, 2000))
def test_te_tm_equal_at_normal_incidence(layers, wl):
    s = make([(n + 1j * k, d) for n, k, d in layers])
    a, b = tmm_response(s, Excitation(wl, "TE")), tmm_response(s, Excitation(wl, "TM"))
    assert abs(a.R - b.R) <= 1e-10 and abs(a.T - b.T) <= 1e-10


@given(st.lists(layer, min_size=1, max_size=5), st.data())
def test_layer_split_invariance(layers, data):
    spec = [(n + 1j * k, d) for n, k, d in layers]
    i = data.draw(st.integers(0, len(spec) - 1))
    s = make(spec)
    mat = s.layers[i].material
    half = UniformLayer(mat, s.layers[i].thickness / 2)
    split = Stack(s.superstrate, s.layers[:i] + (half, half) + s.layers[i + 1 :], s.substrate)
    a, b = tmm_response(s, Excitation(1550)), tmm_response(split, Excitation(1550))
    assert abs(a.R - b.R) <= 1e-10 and abs(a.T - b.T) <= 1e-10
    assert abs(a.A - b.A) <= 1e-10
