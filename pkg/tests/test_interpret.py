"""Saliency and interface concentration against hand-built cases and
finite differences.
"""

import numpy as np
import pytest

from dlsp.interpret import dilate, interface_concentration, mean_interface_concentration, saliency
from dlsp.morpho import BinaryMorphology, interface_mask
from dlsp.nn import REDUCED_ARCH, CnnModel, build_model, cast_model, forward


def reduced_model(seed=0):
    return build_model(REDUCED_ARCH, seed=seed)


def zero_model():
    m = reduced_model()
    return CnnModel(arch=m.arch, params={k: np.zeros_like(v) for k, v in m.params.items()})


def test_saliency_is_max_normalised():
    grid = np.random.default_rng(0).random((16, 16))
    sal = saliency(reduced_model(), grid)
    assert sal.shape == (16, 16)
    assert sal.max() == pytest.approx(1.0)
    assert sal.min() >= 0.0


def test_saliency_zero_network_stays_zero():
    sal = saliency(zero_model(), np.random.default_rng(1).random((16, 16)))
    assert not sal.any()
    assert not np.isnan(sal).any()


def test_saliency_default_target_is_predicted_class():
    model = reduced_model(seed=3)
    grid = np.random.default_rng(2).random((16, 16))
    logits = forward(model, grid[None, :, :, None].astype(np.float32))
    predicted = int(np.argmax(logits[0]))
    np.testing.assert_array_equal(saliency(model, grid), saliency(model, grid, predicted))


def test_saliency_rejects_bad_target():
    with pytest.raises(ValueError):
        saliency(reduced_model(), np.zeros((16, 16)), target=3)
    with pytest.raises(ValueError):
        saliency(reduced_model(), np.zeros((16, 16)), target=-1)


def test_saliency_ratios_match_finite_differences():
    # Normalisation cancels in pixel ratios, so compare against FD logit
    # derivatives at a few pixels.
    model = cast_model(reduced_model(seed=5), np.float64)
    rng = np.random.default_rng(7)
    grid = rng.random((16, 16))
    sal = saliency(model, grid, target=1)

    def logit(g):
        return float(forward(model, g[None, :, :, None])[0, 1])

    h = 1e-6
    fd = {}
    for pix in [(3, 4), (8, 8), (12, 2), (0, 15)]:
        g = grid.copy()
        g[pix] += h
        up = logit(g)
        g[pix] -= 2 * h
        dn = logit(g)
        fd[pix] = abs(up - dn) / (2 * h)
    peak = max(fd.values())
    if peak > 1e-9:
        for pix, val in fd.items():
            assert sal[pix] * peak == pytest.approx(val * max(sal[p] for p in fd), rel=1e-4, abs=1e-8)


def test_dilate_grows_by_one_ring():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True
    grown = dilate(mask, 1)
    expected = mask.copy()
    expected[1, 2] = expected[3, 2] = expected[2, 1] = expected[2, 3] = True
    np.testing.assert_array_equal(grown, expected)
    # lateral wrap, vertical clip
    edge = np.zeros((3, 4), dtype=bool)
    edge[0, 0] = True
    grown = dilate(edge, 1)
    assert grown[0, 3] and grown[1, 0] and grown[0, 1]
    assert grown.sum() == 4


def test_interface_concentration_uniform_map_is_one():
    donor = np.zeros((8, 8), dtype=bool)
    donor[:3, :] = True
    assert interface_concentration(np.ones((8, 8)), BinaryMorphology(donor)) == pytest.approx(1.0)


def test_interface_concentration_hand_computed():
    donor = np.zeros((7, 7), dtype=bool)
    donor[:3, :] = True  # flat horizontal interface between rows 2 and 3
    b = BinaryMorphology(donor)
    band = dilate(interface_mask(b), 1)  # rows 1..4
    assert band.sum() == 4 * 7

    sal = np.zeros((7, 7))
    sal[2, :] = 1.0  # all mass inside the band
    assert interface_concentration(sal, b) == float("inf")

    sal[6, :] = 0.5  # some mass in the complement
    band_mean = 7.0 / 28
    comp_mean = 3.5 / 21
    assert interface_concentration(sal, b) == pytest.approx(band_mean / comp_mean)


def test_interface_concentration_single_phase_is_zero():
    b = BinaryMorphology(np.ones((6, 6), dtype=bool))
    assert interface_concentration(np.ones((6, 6)), b) == 0.0


def test_interface_concentration_zero_map_is_zero_not_nan():
    b = BinaryMorphology(np.arange(36).reshape(6, 6) % 7 < 3)
    out = interface_concentration(np.zeros((6, 6)), b)
    assert out == 0.0 and not np.isnan(out)


def test_interface_concentration_shape_mismatch():
    b = BinaryMorphology(np.ones((6, 6), dtype=bool))
    with pytest.raises(ValueError):
        interface_concentration(np.zeros((5, 5)), b)


def test_mean_interface_concentration_runs_over_batches():
    model = reduced_model(seed=1)
    rng = np.random.default_rng(3)
    grids = [BinaryMorphology(rng.random((16, 16)) > 0.5) for _ in range(5)]
    out = mean_interface_concentration(model, grids)
    assert out > 0.0
    with pytest.raises(ValueError):
        mean_interface_concentration(model, [])
