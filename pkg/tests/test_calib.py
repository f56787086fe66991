import numpy as np
import pytest

from motcal.calib import sigma2_from_fields, summarize
from motcal.exceptions import EmptyMaskError, ValidationError


def test_constant_ratio_inverts_exactly():
    rho = np.random.default_rng(0).uniform(0.5, 1.0, (6, 8))
    surf = sigma2_from_fields(rho, 0.002 * rho, mask_fraction=0.1)
    assert surf.mask.all()
    np.testing.assert_allclose(surf.sigma2, 0.004, rtol=1e-14)
    s = summarize(surf)
    assert s["sigma2_mean_unmasked"] == s["sigma2_min_unmasked"] == pytest.approx(0.004, rel=1e-14)
    assert s["sigma2_max_unmasked"] == pytest.approx(0.004, rel=1e-14)
    assert s["clip_count"] == 0 and s["unmasked_fraction"] == 1.0


def test_low_density_nodes_are_masked():
    rho = np.ones((3, 4))
    rho[1, 2] = 0.5 * 0.2
    surf = sigma2_from_fields(rho, rho, mask_fraction=0.2)
    assert surf.threshold_used == pytest.approx(0.2)
    assert not surf.mask[1, 2] and surf.mask.sum() == 11
    assert np.isnan(surf.sigma2[1, 2])
    np.testing.assert_array_equal(surf.mask, rho >= surf.threshold_used)


def test_negative_values_clipped_and_counted():
    rho = np.ones((2, 3))
    m = np.full((2, 3), 0.01)
    m[0, 1] = -0.01
    surf = sigma2_from_fields(rho, m)
    assert surf.sigma2[0, 1] == 0.0
    assert summarize(surf)["clip_count"] == 1
    assert np.all(surf.unmasked_values >= 0)


def test_scale_consistency():
    rng = np.random.default_rng(3)
    rho = rng.uniform(0, 1, (10, 12))
    m = rng.uniform(0, 0.01, (10, 12))
    s1 = sigma2_from_fields(rho, m, 0.3)
    s2 = sigma2_from_fields(7.5 * rho, 7.5 * m, 0.3)
    both = s1.mask & s2.mask
    np.testing.assert_allclose(s1.sigma2[both], s2.sigma2[both], rtol=1e-14)


def test_errors():
    with pytest.raises(EmptyMaskError):
        sigma2_from_fields(np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        sigma2_from_fields(np.ones((3, 3)), np.ones((3, 3)), mask_fraction=1.0)
