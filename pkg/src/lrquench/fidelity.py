"""Second-order fidelity between a purely disordered and a long-range-tailed ring.

Both Hamiltonians share one eigenvector set; only a few single-particle levels
differ (the outliers lambda_n replace the extreme levels). Evolving the shared
Fermi sea with U D under each and projecting, second order gives

    1 - F(t) = U^2 sum_m |D_m|^2 |g(omega_m, t) - g(omega'_m, t)|^2,
    g(omega, t) = (exp(-i omega t) - 1) / omega      (g -> -i t at omega = 0),

with m the one- and two-pair states of the quench module and omega, omega'
their excitation energies in the two spectra. Expanding the modulus gives the
bracket 4[s(w) + s(w') - 2 cos((w - w') t / 2) sin(w t / 2) sin(w' t / 2)/(w w')],
s(w) = sin^2(w t / 2)/w^2. Only states touching a modified level contribute.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .disorder import DisorderModel, DisorderSpec, rng_for, sample
from .model import ModelParams, dispersion
from .quench import (build_fermi_sea, enumerate_excitations, haar_weights, occupation_mask,
                     realization_weights)
from .spectral import SpectrumResult, eigensolve, predicted_dos


@dataclass
class SpectrumPair:
    eps: np.ndarray
    eps_prime: np.ndarray
    basis: SpectrumResult
    modified_indices: np.ndarray
    identical: bool = False

    def __post_init__(self):
        if len(self.eps) != len(self.eps_prime):
            raise ValueError("spectra differ in length")
        diff = np.flatnonzero(self.eps != self.eps_prime)
        if not np.all(np.isin(diff, self.modified_indices)):
            raise ValueError("eps_prime differs outside modified_indices")

    @property
    def L(self) -> int:
        return len(self.eps)


def replace_extremes(eps, lambdas):
    """Put positive outliers on the highest levels and negative ones on the lowest.

    The largest outlier goes to the highest level, so the ordering of levels
    is kept whenever the outliers lie outside the bulk.
    """
    eps = np.asarray(eps, dtype=float)
    lam = np.sort(np.asarray(lambdas, dtype=float))
    pos, neg = lam[lam > 0], lam[lam < 0]
    if pos.size + neg.size > eps.size:
        raise ValueError("more outliers than levels")
    order = np.argsort(eps, kind="stable")
    top = order[eps.size - pos.size:] if pos.size else np.zeros(0, int)
    bottom = order[:neg.size]
    new = eps.copy()
    new[top] = pos
    new[bottom] = neg
    return new, np.sort(np.concatenate((bottom, top)))


def paired_spectra(params: ModelParams, spec: DisorderSpec, want_vectors=True) -> SpectrumPair:
    if spec.model != DisorderModel.independent:
        raise ValueError("paired spectra use the independent disorder model")
    H = sample(params.with_(M_alpha=0.0), spec)
    res = eigensolve(H, want_vectors=want_vectors,
                     meta=dict(seed=spec.seed, realization_index=spec.realization_index))
    if params.M_alpha == 0:
        lam = np.zeros(0)
    else:
        lam = predicted_dos(params, dispersion(params)).lambdas - params.mu
    eps_p, idx = replace_extremes(res.eigenvalues, lam)
    return SpectrumPair(res.eigenvalues.copy(), eps_p, res, idx, identical=idx.size == 0)


def gfun(omega, t):
    omega = np.asarray(omega, dtype=float)
    small = np.abs(omega) < 1e-12
    safe = np.where(small, 1.0, omega)
    return np.where(small, -1j * t, np.expm1(-1j * safe * t) / safe)


def bracket(omega, omega_p, t):
    """|g(w) - g(w')|^2 / 4, the symmetric second-order bracket."""
    return 0.25 * np.abs(gfun(omega, t) - gfun(omega_p, t)) ** 2


@dataclass
class FidelityResult:
    times: np.ndarray
    F: np.ndarray
    one_minus_F_raw: np.ndarray
    params: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["t,F"] + [f"{t:.17g},{f:.17g}" for t, f in zip(self.times, self.F)]
        return "\n".join(lines) + "\n"

    def sidecar(self) -> str:
        return json.dumps(dict(params=self.params, seeds=self.seeds, n_times=int(self.times.size),
                               max_one_minus_F=float(np.max(1 - self.F, initial=0.0))),
                          indent=2, sort_keys=True)


def _result(times, raw, meta=None) -> FidelityResult:
    raw = np.asarray(raw, dtype=float)
    F = np.clip(1.0 - raw, 0.0, 1.0)
    F[np.asarray(times) == 0] = 1.0
    return FidelityResult(np.asarray(times, dtype=float), F, raw, **(meta or {}))


def fidelity_series(pair: SpectrumPair, coeffs, U: float, times, chunk=1 << 15) -> FidelityResult:
    """coeffs: "exact" (use the pair's eigenvectors), "averaged", or an L x L
    array of eigenvector columns overriding the pair's basis."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    if pair.identical or U == 0:
        return _result(times, np.zeros(times.size))
    if isinstance(coeffs, str) and coeffs == "averaged":
        return _result(times, U * U * averaged_sum(pair, times))
    basis = pair.basis
    if not isinstance(coeffs, str):
        V = np.asarray(coeffs)
        if V.shape != (pair.L, pair.L):
            raise ValueError(f"coefficient array has shape {V.shape}, expected {(pair.L, pair.L)}")
        basis = SpectrumResult(pair.eps, V)
    elif coeffs != "exact":
        raise ValueError(f"unknown coefficient mode {coeffs!r}")
    state = build_fermi_sea(SpectrumResult(pair.eps, basis.eigenvectors), pair.L // 2)
    mask = np.zeros(pair.L, bool)
    mask[pair.modified_indices] = True
    raw = enumerate_excitations(state, restrict_to=mask, allow_large=True)
    om, omp = raw.omega(pair.eps), raw.omega(pair.eps_prime)
    w = raw.amplitude2 * raw.multiplicity
    keep = om != omp
    om, omp, w = om[keep], omp[keep], w[keep]
    acc = np.zeros(times.size)
    for s in range(0, w.size, chunk):
        sl = slice(s, s + chunk)
        acc += np.sum(w[sl][None, :] * bracket(om[sl][None, :], omp[sl][None, :], times[:, None]), axis=1)
    return _result(times, 4.0 * U * U * acc)


# averaged tier ---------------------------------------------------------------

def _patterns(pair: SpectrumPair, s):
    """Yield (K(s), Delta) for every class of states touching a modified level.

    K(s) = sum_m w_m exp(-i omega_m s) over the class, Delta = omega' - omega.
    Positions 1, 3 are empty levels (phase -i e s), 2, 4 filled (phase +i e s).
    """
    L = pair.L
    occ = occupation_mask(pair.eps, L // 2)
    mod = np.zeros(L, bool)
    mod[pair.modified_indices] = True
    V = pair.basis.eigenvectors
    w = haar_weights(L, L // 2) if V is None else realization_weights(V, occ)
    e = pair.eps
    mu = 0.5 * (np.max(e[occ]) + np.min(e[~occ]))
    delta = pair.eps_prime - pair.eps

    def side(free_levels, fixed_levels, sign):
        """Options for a pair of same-kind positions: (T_distinct, T_coincident, Delta)."""
        f1 = np.exp(sign * 1j * np.outer(s, e[free_levels] - mu)).sum(axis=1)
        f2 = np.exp(sign * 2j * np.outer(s, e[free_levels] - mu)).sum(axis=1)
        x = {k: np.exp(sign * 1j * s * (e[k] - mu)) for k in fixed_levels}
        d = -sign  # Delta enters with +delta for empty positions (sign -1)
        opts = [(f1 * f1 - f2, f2, 0.0, 1.0)]
        for k in fixed_levels:
            opts.append((x[k] * f1, 0.0, d * delta[k], 2.0))  # k in either slot
        for a, k in enumerate(fixed_levels):
            opts.append((0.0, x[k] * x[k], 2 * d * delta[k], 1.0))
            for k2 in fixed_levels[a + 1:]:
                opts.append((x[k] * x[k2], 0.0, d * (delta[k] + delta[k2]), 2.0))
        return opts, f1, x

    empty_opts, fe, xe = side(np.flatnonzero(~occ & ~mod), list(np.flatnonzero(~occ & mod)), -1)
    full_opts, ff, xf = side(np.flatnonzero(occ & ~mod), list(np.flatnonzero(occ & mod)), +1)
    for i, (a0, a1, da, ma) in enumerate(empty_opts):
        for j, (b0, b1, db, mb) in enumerate(full_opts):
            if i == 0 and j == 0:
                continue
            K = ma * mb * (w["dd"] * a0 * b0 + w["c13"] * a1 * b0 + w["c24"] * a0 * b1 + w["both"] * a1 * b1)
            yield K, da + db
    # one-pair states, both spins
    ws = 2.0 * w["single"]
    for k, xk in xe.items():
        yield ws * xk * ff, delta[k]
        for k2, yk in xf.items():
            yield ws * xk * yk, delta[k] - delta[k2]
    for k2, yk in xf.items():
        yield ws * fe * yk, -delta[k2]


def averaged_sum(pair: SpectrumPair, times, step=None) -> np.ndarray:
    """sum_m w_m |g(omega_m) - g(omega'_m)|^2 with class-averaged w_m.

    The class means come from the pair's eigenvectors when present, otherwise
    from random-unit-vector moments.

    |g - g'|^2 = int_0^t int_0^t K(tau - tau') u(tau) u*(tau') with
    u = 1 - exp(-i Delta tau). Midpoint rule on a uniform grid; the growing
    square is accumulated row by row, each row being a causal convolution.
    """
    times = np.asarray(times, dtype=float)
    t_max = float(np.max(times, initial=0.0))
    if t_max == 0:
        return np.zeros(times.size)
    spread = 2.0 * (max(np.ptp(pair.eps), np.ptp(pair.eps_prime)))
    h = min(0.005, 0.1 / max(spread, 1e-9)) if step is None else step
    n = int(np.ceil(t_max / h))
    h = t_max / n
    lags = h * np.arange(n)
    mid = h * (np.arange(n) + 0.5)
    inc = np.zeros(n)
    for K, D in _patterns(pair, lags):
        K = np.broadcast_to(K, lags.shape).astype(complex)
        if D == 0:
            continue
        u = -np.expm1(-1j * D * mid)
        kn = K.copy()
        kn[0] = 0.0
        c = fftconvolve(kn, np.conj(u))[:n]
        inc += (K[0].real * np.abs(u) ** 2 + 2.0 * np.real(u * c))
    S = np.concatenate(([0.0], np.cumsum(inc) * h * h))
    grid = h * np.arange(n + 1)
    return CubicSpline(grid, S)(times)


# Porter-Thomas statistics ----------------------------------------------------

def porter_thomas_pdf(z):
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("z must be > 0")
    return np.exp(-z / 2) / np.sqrt(2 * np.pi * z)


def porter_thomas_cdf(z):
    return stats.chi2.cdf(np.asarray(z, dtype=float), df=1)


def finite_l_pdf(z, L: int):
    """Exact density of z = L |a|^2 for a random unit vector in dimension L."""
    z = np.asarray(z, dtype=float)
    return stats.beta.pdf(z / L, 0.5, (L - 1) / 2) / L


def finite_l_cdf(z, L: int):
    return stats.beta.cdf(np.asarray(z, dtype=float) / L, 0.5, (L - 1) / 2)


def sample_unit_vector_component(L: int, n_samples: int, seed: int = 0, chunk: int = 8192) -> np.ndarray:
    """z = L |a_1|^2 for uniformly random unit vectors (normalized Gaussian vectors)."""
    if L < 3:
        raise ValueError("L must be >= 3")
    rng = rng_for(seed, 0)
    out = np.empty(n_samples)
    for s in range(0, n_samples, chunk):
        m = min(chunk, n_samples - s)
        g = rng.standard_normal((m, L))
        out[s:s + m] = L * g[:, 0] ** 2 / np.sum(g * g, axis=1)
    return out


def fidelity_realization(params: ModelParams, realization_index: int, times, coeffs="auto"):
    from .disorder import make_spec

    spec = make_spec(params, "independent", realization_index)
    if coeffs == "auto":
        coeffs = "exact" if params.L <= 128 else "averaged"
    pair = paired_spectra(params, spec, want_vectors=True)
    res = fidelity_series(pair, coeffs, params.U, times)
    res.params = asdict(params)
    res.seeds = dict(seed=params.seed, realization_index=realization_index,
                     n_modified=int(pair.modified_indices.size))
    return res
