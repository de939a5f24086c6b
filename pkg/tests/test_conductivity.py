import math

import numpy as np
import pytest

from thermal_enclosure import Ball, ConductivitySpec, FluxSpec, InclusionScene, verify_flux_admissibility
from thermal_enclosure.conductivity import blend_tensor, flux_value, sample_conductivity
from thermal_enclosure.errors import ConfigurationError
from thermal_enclosure.probes import PlaneProbe


@pytest.fixture
def scene():
    return InclusionScene(Ball([0, 0], 1), Ball([0.2, 0], 0.3))


def test_background_outside_inclusion(scene):
    spec = ConductivitySpec.scalar(2.0)
    np.testing.assert_array_equal(sample_conductivity(spec, scene, [0.9, 0]), np.eye(2))


def test_inclusion_tensor_inside(scene):
    spec = ConductivitySpec.scalar(2.0)
    np.testing.assert_array_equal(sample_conductivity(spec, scene, [0.2, 0]), 2 * np.eye(2))


def test_cut_cell_blend():
    np.testing.assert_allclose(blend_tensor(ConductivitySpec.scalar(2.0), 0.5), 1.5 * np.eye(2))


@pytest.mark.parametrize("tensor, cls", [
    (0.5 * np.eye(2), "A2"), (2 * np.eye(2), "A1"), (np.diag([2.0, 0.5]), "A2"),
    (np.array([[1.0, 2.0], [0.0, 1.0]]), "indefinite"), (-np.eye(2), "indefinite"),
])
def test_invalid_tensors_rejected(tensor, cls):
    with pytest.raises(ConfigurationError):
        ConductivitySpec(tensor, cls)


def test_scalar_class_inference():
    assert ConductivitySpec.scalar(2.0).contrast_class == "A2"
    assert ConductivitySpec.scalar(0.5).contrast_class == "A1"


def test_flux_values():
    assert flux_value(FluxSpec.constant(1.0), [1, 0], 0.3) == 1.0
    assert flux_value(FluxSpec.time_power(1), [1, 0], 0.5) == 0.5


def test_probe_flux_plane_normal_derivative():
    probe = PlaneProbe(np.array([1.0, 0.0]), 4.0)
    val = flux_value(FluxSpec.probe_flux("one"), [1, 0], 0.2, tau=4.0, probe=probe, normal=[1, 0])
    assert val == pytest.approx(2 * math.e**2, rel=1e-14)


def test_probe_flux_needs_probe():
    with pytest.raises(ConfigurationError):
        flux_value(FluxSpec.probe_flux("one"), [1, 0], 0.2)


def test_admissibility_constant():
    taus = [10.0, 20.0, 40.0, 80.0]
    rep = verify_flux_admissibility(FluxSpec.constant(1.0, mu=1.0), taus)
    assert rep.admissible
    assert rep.scaled_min[0] == pytest.approx(-math.expm1(-10.0), rel=1e-12)


def test_admissibility_time_power():
    rep = verify_flux_admissibility(FluxSpec.time_power(1, mu=2.0), [20.0, 40.0, 80.0, 160.0])
    assert rep.admissible
    assert rep.scaled_min[0] == pytest.approx(1 - 21 * math.exp(-20), rel=1e-12)


def test_admissibility_wrong_exponent_detected():
    taus = 10.0 * 2.0 ** np.arange(12)
    rep = verify_flux_admissibility(FluxSpec.constant(1.0, mu=0.0), taus)
    assert not rep.admissible
    assert "lower bound" in rep.message
