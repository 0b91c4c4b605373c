"""Physical parameters, the clean long-range dispersion and the clean hopping matrix.

The ring has L sites (L even) with periodic boundaries. Couplings decay as
1/r^alpha and are optionally multiplied by the Kac factor

    c_alpha = (1 - alpha) 2^(1 - alpha) L^(alpha - 1),

which keeps the spectrum bounded as L grows for alpha < 1.

The normative dispersion is the finite one-sided sum

    eps_n = -c_alpha * sum_{r=1}^{L/2} cos(2 pi n r / L) / r^alpha,  n in (-L/2, L/2].

The clean matrix is built so that its eigenvalues are exactly mu + M_alpha * eps_n:
a bond at distance r < L/2 carries half of the r-th term (it appears twice in
the circulant sum), the antipodal bond r = L/2 carries the full term.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """All physical parameters of one run.

    ``sigma`` is the dimensionless disorder strength; the per-entry standard
    deviation follows from it, ``J`` and ``L`` (see ``disorder.entry_sigma``).
    """

    L: int
    alpha: float = 0.5
    M_alpha: float = 1.0
    J: float = 1.0
    sigma: float = 1.0
    U: float = 0.0
    mu: float = 0.0
    kac: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise ValueError(f"L must be an even integer >= 2, got {self.L}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.J <= 0:
            raise ValueError(f"J must be > 0, got {self.J}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.kac and self.alpha >= 1:
            raise ValueError("Kac rescaling requires alpha < 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def J_eff(self) -> float:
        """Semicircle radius parameter of the sampled bulk, sigma * J."""
        return self.sigma * self.J

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


def kac_factor(alpha: float, L: int, kac: bool) -> float:
    if not kac:
        return 1.0
    if not 0 <= alpha < 1:
        raise ValueError("Kac factor is defined for 0 <= alpha < 1 only")
    return (1.0 - alpha) * 2.0 ** (1.0 - alpha) * float(L) ** (alpha - 1.0)


def mode_indices(L: int) -> np.ndarray:
    """Mode labels n in (-L/2, L/2], in FFT order 0, 1, ..., L/2, -L/2+1, ..., -1.

    FFT order is the tie-break order used wherever degenerate modes must be
    ranked (lowest position first).
    """
    n = np.arange(L)
    return np.where(n <= L // 2, n, n - L)


def bond_profile(L: int, alpha: float) -> np.ndarray:
    """1/r^alpha for r = 1..L/2 (index r-1)."""
    r = np.arange(1, L // 2 + 1, dtype=float)
    return r ** (-alpha)


def bond_multiplicity(L: int) -> np.ndarray:
    """Share of the r-th dispersion term carried by a single bond at distance r."""
    w = np.full(L // 2, 0.5)
    w[-1] = 1.0
    return w


@dataclass(frozen=True)
class DispersionTable:
    """Clean single-particle energies eps_n (without M_alpha and mu)."""

    modes: np.ndarray
    energies: np.ndarray
    kac_applied: bool
    alpha: float
    L: int
    c_alpha: float = field(default=1.0)

    def __getitem__(self, n: int) -> float:
        return float(self.energies[int(n) % self.L])

    def as_dict(self) -> dict:
        return {int(n): float(e) for n, e in zip(self.modes, self.energies)}


def dispersion(params: ModelParams) -> DispersionTable:
    """Finite-sum dispersion eps_n for every mode, in FFT order."""
    L, alpha = params.L, params.alpha
    c = kac_factor(alpha, L, params.kac)
    n = mode_indices(L)
    r = np.arange(1, L // 2 + 1)
    # eps_n is even in n; summing with |n| r mod L keeps eps_n and eps_-n bit-identical
    phase = np.outer(np.abs(n), r) % L
    cosines = np.cos(2 * np.pi * phase / L)
    eps = -c * (cosines @ bond_profile(L, alpha))
    return DispersionTable(n, eps, params.kac, alpha, L, c)


def dispersion_integral(params: ModelParams, n: int) -> float:
    """Large-L integral approximation of eps_n, a check on the finite sum.

    eps_n ~ -c_alpha L^(1-alpha) int_0^(1/2) cos(2 pi n x) x^(-alpha) dx
    """
    from scipy.integrate import quad

    c = kac_factor(params.alpha, params.L, params.kac)
    a = params.alpha
    if a >= 1:
        raise ValueError("the integral approximation needs alpha < 1")
    if n == 0:
        val = 0.5 ** (1 - a) / (1 - a)
    else:
        # u = x^(1 - alpha) removes the endpoint singularity
        b = 1.0 - a
        val = quad(lambda u: np.cos(2 * np.pi * n * u ** (1 / b)), 0, 0.5 ** b, limit=400)[0] / b
    return -c * params.L ** (1 - a) * val


def clean_hopping_entries(params: ModelParams) -> np.ndarray:
    """Off-diagonal matrix element for each distance r = 1..L/2."""
    c = kac_factor(params.alpha, params.L, params.kac)
    return -c * params.M_alpha * bond_multiplicity(params.L) * bond_profile(params.L, params.alpha)


def circulant_from_distances(values: np.ndarray, L: int, diagonal: float) -> np.ndarray:
    """Symmetric circulant with entry (i, j) = values[dist(i, j) - 1]."""
    i = np.arange(L)
    d = np.abs(i[:, None] - i[None, :])
    d = np.minimum(d, L - d)
    full = np.concatenate(([diagonal], values))
    return full[d]


def build_clean_hopping_matrix(params: ModelParams) -> np.ndarray:
    """sigma -> 0 single-particle matrix; eigenvalues are mu + M_alpha eps_n."""
    return circulant_from_distances(clean_hopping_entries(params), params.L, params.mu)


def half_filling_mu(spectrum) -> tuple[float, bool]:
    """Chemical potential midway between levels L/2-1 and L/2.

    Returns (mu, degenerate). A degenerate Fermi level returns the common value.
    """
    s = np.asarray(spectrum, dtype=float)
    L = s.size
    if L % 2 or L == 0:
        raise ValueError("spectrum length must be even and nonzero")
    if np.any(np.diff(s) < 0):
        raise ValueError("spectrum must be sorted ascending")
    lo, hi = s[L // 2 - 1], s[L // 2]
    if lo == hi:
        return float(lo), True
    return float(0.5 * (lo + hi)), False
