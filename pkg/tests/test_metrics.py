"""Image metrics and neighbor evaluation helpers."""

import numpy as np
import pytest

from mfvdm.graph import ViewGraph
from mfvdm.metrics import (
    fit_to_reference,
    mse,
    neighbor_histograms,
    psnr,
    ssim,
    wrap_degrees,
)


def test_mse_basic():
    a = np.zeros((4, 4))
    b = np.full((4, 4), 2.0)
    assert mse(a, a) == 0.0
    assert mse(a, b) == 4.0
    with pytest.raises(ValueError):
        mse(np.zeros((3, 3)), np.zeros((4, 4)))


def test_psnr_values():
    ref = np.zeros((4, 4))
    ref[0, 0] = 10.0
    x = ref.copy()
    assert psnr(x, ref) == np.inf
    x[1, 1] = 1.0  # MSE = 1/16, peak = 10
    expected = 10.0 * np.log10(100.0 / (1.0 / 16.0))
    assert abs(psnr(x, ref) - expected) < 1e-12
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 4)))


def test_ssim_identical_is_one():
    rng = np.random.Generator(np.random.Philox(1))
    img = rng.normal(size=(33, 33))
    assert abs(ssim(img, img) - 1.0) < 1e-12


def test_ssim_decreases_with_noise():
    rng = np.random.Generator(np.random.Philox(2))
    ref = rng.normal(size=(33, 33))
    s1 = ssim(ref + 0.1 * rng.normal(size=ref.shape), ref)
    s2 = ssim(ref + 1.0 * rng.normal(size=ref.shape), ref)
    assert 1.0 > s1 > s2


def test_ssim_against_skimage():
    skimage = pytest.importorskip("skimage.metrics")
    rng = np.random.Generator(np.random.Philox(3))
    ref = rng.normal(size=(33, 33))
    x = ref + 0.5 * rng.normal(size=ref.shape)
    dr = ref.max() - ref.min()
    theirs = skimage.structural_similarity(
        x, ref, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
        data_range=dr,
    )
    assert abs(ssim(x, ref, data_range=dr) - theirs) < 1e-7


def test_ssim_validation():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))
    with pytest.raises(ValueError):
        ssim(np.zeros((33, 33)), np.zeros((17, 17)))


def test_fit_to_reference_recovers_affine():
    rng = np.random.Generator(np.random.Philox(4))
    ref = rng.normal(size=(17, 17))
    x = 3.0 * ref - 2.0
    np.testing.assert_allclose(fit_to_reference(x, ref), ref, atol=1e-12)
    # degenerate input maps to the reference mean
    flat = fit_to_reference(np.ones((17, 17)), ref)
    np.testing.assert_allclose(flat, ref.mean(), atol=1e-12)


def test_wrap_degrees():
    np.testing.assert_allclose(wrap_degrees([0.0, 190.0, -190.0, 360.0, -180.0]),
                               [0.0, -170.0, 170.0, 0.0, 180.0])


def test_neighbor_histograms(tiny_dataset, demo_graph):
    man = tiny_dataset["manifest"]
    h = neighbor_histograms(demo_graph, man)
    n_edges = int(demo_graph.degrees.sum())
    assert h["theta_deg"].size == n_edges
    assert h["align_err_deg"].size == n_edges
    assert h["theta_hist"].sum() == n_edges
    assert np.all(h["theta_deg"] >= 0) and np.all(h["theta_deg"] <= 180)
    assert np.all(np.abs(h["align_err_deg"]) <= 180)


def test_neighbor_histograms_requires_truth(demo_graph, tiny_dataset):
    import dataclasses

    man = dataclasses.replace(tiny_dataset["manifest"], rotations=None)
    with pytest.raises(ValueError):
        neighbor_histograms(demo_graph, man)
