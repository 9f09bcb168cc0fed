import numpy as np
import pytest

from periodic_fm.errors import EmptySampleSet
from periodic_fm.materials import (
    GEOMETRY_NAMES,
    MaterialCoefficients,
    check_assumptions,
    contrasts,
    interior_sample,
    preset_geometry,
    preset_materials,
    vacuum,
)


def test_geometry_examples():
    assert preset_geometry("balls").contains((np.pi / 2, np.pi / 2, 0.0))
    assert not preset_geometry("cubes").contains((0.0, 0.0, 0.31))
    assert not preset_geometry("strip_with_holes").contains((0.0, 0.0, 0.0))
    assert preset_geometry("strip_with_holes").contains((3.0, 0.0, 0.0))
    assert preset_geometry("bars").contains((0.0, 1.7, 0.1))
    assert preset_geometry("bars").contains((3.1, -2.0, 0.0))


def test_boundary_is_outside():
    assert not preset_geometry("cubes").contains((np.pi / 2, 0.0, 0.0))
    assert not preset_geometry("balls").contains((np.pi / 2, np.pi / 2, 0.6))


def test_unknown_geometry():
    with pytest.raises(ValueError):
        preset_geometry("torus")


@pytest.mark.parametrize("name", GEOMETRY_NAMES)
def test_bounding_height(name):
    g = preset_geometry(name)
    assert 0 < g.bounding_height < 1
    pts = interior_sample(g, 32)
    assert len(pts) > 0
    assert np.abs(pts[:, 2]).max() < g.bounding_height


@pytest.mark.parametrize("name", GEOMETRY_NAMES)
def test_periodic_membership(name):
    g = preset_geometry(name)
    rng = np.random.default_rng(3)
    x = rng.uniform(-np.pi, np.pi, (200, 3))
    x[:, 2] *= 0.2
    shifted = x + np.array([2 * np.pi, -4 * np.pi, 0.0])
    assert np.array_equal(g.inside(*x.T), g.inside(*shifted.T))


def test_preset_values():
    c = preset_materials(preset_geometry("balls"))
    eps, mui, xi = c.evaluate(np.pi / 2, np.pi / 2, 0.0)
    assert eps[0, 0] == 1 + 0.75j
    assert np.allclose(xi, xi.T) and np.all(xi.imag == 0)
    eps, mui, xi = c.evaluate(0.0, 0.0, 0.0)
    assert np.array_equal(eps, np.eye(3)) and np.array_equal(mui, np.eye(3)) and not xi.any()


def test_contrasts():
    c = preset_materials(preset_geometry("balls"))
    ct = contrasts(c)
    assert np.allclose(ct.Q, np.diag([0.7j, 1j, 0.9j]), atol=1e-15)
    assert np.allclose(ct.P, np.diag([0.75j, 0.9j, 0.8j]), atol=1e-15)
    out = contrasts(c, [(0.0, 0.0, 0.0)])
    assert not out.P.any() and not out.Q.any()
    # inverse reconstruction is exact
    assert np.array_equal(ct.P + np.eye(3), c.eps_r)
    assert np.array_equal(np.eye(3) - ct.Q, c.mu_r_inv)


def test_assumptions_preset():
    g = preset_geometry("balls")
    rep = check_assumptions(preset_materials(g), interior_sample(g))
    # exact arithmetic: C2 = min(0.75 + 0.01^2*0.7, 0.9 + 0.02^2, 0.8 + 0.05^2*0.9)
    assert rep.C1 == pytest.approx(0.7, abs=1e-12)
    assert rep.C2 == pytest.approx(0.75007, abs=1e-12)
    frob = np.sqrt(0.01**2 * abs(1 - 0.7j) ** 2 + 0.02**2 * abs(1 - 1j) ** 2 + 0.05**2 * abs(1 - 0.9j) ** 2)
    assert rep.frob_bound == pytest.approx(frob, rel=1e-12)
    assert 0.0739 <= rep.frob_bound <= 0.0741
    assert 0.5 * (rep.frob_bound**2 + 1) == pytest.approx(0.50274, abs=1e-5)
    assert rep.passes_a1 and rep.passes_a2


def test_assumptions_lossless_fail():
    g = preset_geometry("cubes")
    c = MaterialCoefficients(g, 2 * np.eye(3), np.eye(3), np.zeros((3, 3)))
    rep = check_assumptions(c, interior_sample(g))
    assert rep.C1 == 0 and rep.C2 == 0
    assert not rep.passes_a2


def test_assumptions_large_coupling_fail():
    g = preset_geometry("cubes")
    base = preset_materials(g)
    c = MaterialCoefficients(g, base.eps_r, base.mu_r_inv, 20 * base.xi)
    rep = check_assumptions(c, interior_sample(g))
    assert rep.frob_bound == pytest.approx(1.4798, abs=1e-3)
    assert 0.5 * (rep.frob_bound**2 + 1) == pytest.approx(1.5949, abs=1e-3)
    assert not rep.passes_a2


def test_empty_samples():
    with pytest.raises(EmptySampleSet):
        check_assumptions(preset_materials(preset_geometry("balls")), np.zeros((0, 3)))


def test_monotone_in_samples():
    g = preset_geometry("balls")
    rng = np.random.default_rng(0)
    # piecewise-constant presets: any extra interior samples leave the report unchanged or worse
    pts = interior_sample(g)
    r1 = check_assumptions(preset_materials(g), pts[:3])
    r2 = check_assumptions(preset_materials(g), pts[rng.permutation(len(pts))])
    assert r2.C1 <= r1.C1 and r2.C2 <= r1.C2 and r2.frob_bound >= r1.frob_bound


def test_vacuum_and_scaling():
    g = preset_geometry("balls")
    v = vacuum(g)
    assert not contrasts(v).P.any()
    s = preset_materials(g).scaled(0.5)
    assert np.allclose(contrasts(s).P, 0.5 * contrasts(preset_materials(g)).P)
    assert np.allclose(s.xi, 0.5 * preset_materials(g).xi)


def test_coefficients_immutable():
    c = preset_materials(preset_geometry("balls"))
    with pytest.raises(ValueError):
        c.eps_r[0, 0] = 3
    with pytest.raises(ValueError):
        MaterialCoefficients(c.geometry, np.eye(2), c.mu_r_inv, c.xi)
