"""Weiss field of the long-range lattice versus the semicircle one.

The flat model (one isolated level eps0 with weight 1/N) and the mixed model
(semicircle plus a few outliers) both differ from the semicircle Weiss field
by a correction that falls as 1/N.
"""
import numpy as np

from lrquench import dmft

Ns = 2 ** np.arange(4, 13)
G = complex(dmft.hilbert_transform(dmft.DOSModel.semicircle(1.0), 1j + 0.2))
for name, c in [("flat, Kac on", dmft.flat_corrections(G, 0.7, Ns, 0.2, 1.0, kac=True)),
                ("flat, Kac off", dmft.flat_corrections(G, 0.7, Ns, 0.2, 1.0, kac=False)),
                ("mixed", dmft.mixed_corrections(G, 1.0, [3.0, -2.5, 4.0], Ns, 0.2, 1.0))]:
    print(f"{name:14s} exponent {dmft.power_law_exponent(Ns, c):+.4f}   |corr(N=4096)| = {abs(c[-1]):.3g}")
