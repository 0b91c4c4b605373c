"""Spectrum of the disordered long-range ring.

A random symmetric matrix with a long-range mean profile has a semicircle bulk
plus isolated outliers at lambda = theta + J^2/theta for every mode with
|theta| = |M eps_n| > J. Below the decay exponent 1 the profile keeps discrete
levels, above it the mean is a small perturbation and the bulk shape is lost
once the couplings are not rescaled.
"""
import numpy as np

from lrquench import spectral
from lrquench.disorder import make_spec, sample
from lrquench.model import ModelParams, dispersion

for alpha, kac in [(0.5, True), (1.5, False)]:
    p = ModelParams(L=1024, alpha=alpha, M_alpha=-4 * np.pi, kac=kac, seed=0)
    ev = spectral.eigensolve(sample(p, make_spec(p)), want_vectors=False).eigenvalues
    pred = spectral.predicted_dos(p, dispersion(p)) if alpha < 1 else spectral.PredictedDOS(p.J_eff, [], np.nan)
    r = spectral.compare_spectrum(spectral.SpectrumResult(ev), pred)
    print(f"alpha={alpha}: ks={r.ks:.4f}, predicted outliers={r.predicted.size}, "
          f"unmatched={r.unmatched_predicted}")
    # largest predicted and observed outliers side by side
    for lam, got in list(zip(r.predicted, r.matched))[-3:]:
        print(f"    predicted {lam:8.4f}  observed {got:8.4f}")
