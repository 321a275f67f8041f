"""Nearest-neighbor classification and spectral refinement on a noisy stack.

Builds the rotationally-invariant-distance graph, refines it with the
multi-frequency spectral affinity, and scores both against the ground-truth
viewing directions from the manifest. At moderate noise the refined graph
recovers clearly more true neighbors than the initial one.

Run: python demos/02_classification.py   (about a minute)
"""

import numpy as np

from mfvdm import (
    build_basis,
    coeff_noise_variance,
    expand_stack,
    initial_nn_search,
    neighbor_histograms,
    preprocess,
    simulate_dataset,
)
from mfvdm.spectral import align_graph, compute_bundle, refine_neighbors

L, n, s = 33, 600, 30
clean, _, noisy, profiles, manifest = simulate_dataset(
    n, L, seed=3, snr=0.2, support_radius=16.0
)
pre = preprocess(noisy, 16.0, standardize=True, phase_flip=True,
                 profiles=profiles, groups=manifest.defocus_group)

basis = build_basis(L, 0.5, 16.0)
coeffs = expand_stack(pre, basis)

# Wiener shrinkage of the coefficient columns: after standardization the
# pixel noise variance is about 1, so the unit-noise table applies.
noise_var = coeff_noise_variance(basis)
initial = initial_nn_search(coeffs, basis, s, noise_var=noise_var,
                            energy_fraction=1.0)

bundle = compute_bundle(initial, k_max=10, m=50)
refined = refine_neighbors(bundle, s)
align_graph(bundle, refined)


def frac_true(graph):
    h = neighbor_histograms(graph, manifest)
    return float(np.mean(h["theta_deg"] < 20.0))


print(f"true-neighbor fraction (viewing angle < 20 deg):")
print(f"  initial graph: {frac_true(initial):.3f}")
print(f"  refined graph: {frac_true(refined):.3f}")

h = neighbor_histograms(refined, manifest)
print(f"refined alignment error: median {np.median(np.abs(h['align_err_deg'])):.2f} deg "
      f"over {h['align_err_deg'].size} edges")
