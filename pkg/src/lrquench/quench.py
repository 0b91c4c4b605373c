"""Second-order quench dynamics of the double occupancy.

Starting from the half-filled Fermi sea |FS> of H0 and switching on U D with
D = sum_i n_i,up n_i,down, second-order unitary perturbation theory gives the
kinetic energy exactly at order U^2,

    E_kin(t) = E0 + 4 U^2 sum_m omega_m |D_m|^2 sin^2(omega_m t / 2) / omega_m^2,

because H0 commutes with itself. The total energy is conserved, so the double
occupancy follows at leading order as

    d(t) = d0 - (E_kin(t) - E0) / U = d0 - 4 U sum_m |D_m|^2 sin^2(omega_m t / 2) / omega_m.

Here m runs over the eigenstates of H0 reached by D from |FS>: one particle-hole
pair in each spin (l1, l3 empty, l2, l4 filled),

    D_m = sum_i a*_{i,l1} a_{i,l2} a*_{i,l3} a_{i,l4},  omega_m = e_l1 - e_l2 + e_l3 - e_l4,

and one pair in a single spin, dressed by the other spin's site density rho_i,

    D_m = sum_i rho_i a*_{i,l1} a_{i,l2},  omega_m = e_l1 - e_l2   (twice, once per spin).

The single-pair amplitudes vanish for uniform density (clean rings) but not
with disorder. An ExcitationSpectrum stores the peaks (omega_m, |D_m|^2).

Two tiers: exact enumeration from eigenvectors (L <= 128 unless overridden)
and an averaged tier that keeps the sampled eigenvalues but replaces each
|D_m|^2 by the mean over its index class (all levels distinct, l1 = l3,
l2 = l4, both, single pair). The class means are computed exactly from the
realization's eigenvectors in O(L^3), or taken from random-unit-vector
moments when no eigenvectors are given.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .model import ModelParams, dispersion, mode_indices
from .spectral import SpectrumResult

EXACT_L_MAX = 128


@dataclass
class FermiSeaState:
    occupations: np.ndarray  # bool per level, identical for both spins
    basis: SpectrumResult
    filling: int

    @property
    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.occupations)

    @property
    def empty(self) -> np.ndarray:
        return np.flatnonzero(~self.occupations)


def occupation_mask(energies, filling: int) -> np.ndarray:
    """Lowest `filling` levels; ties go to the lowest position (stable sort)."""
    e = np.asarray(energies, dtype=float)
    if not 0 <= filling <= e.size:
        raise ValueError("filling must lie in [0, L]")
    occ = np.zeros(e.size, bool)
    occ[np.argsort(e, kind="stable")[:filling]] = True
    return occ


def build_fermi_sea(spectrum: SpectrumResult, filling: int) -> FermiSeaState:
    return FermiSeaState(occupation_mask(spectrum.eigenvalues, filling), spectrum, int(filling))


def site_density(state: FermiSeaState) -> np.ndarray:
    V = state.basis.eigenvectors
    if V is None:
        raise ValueError("eigenvectors required")
    return np.sum(np.abs(V[:, state.occupations]) ** 2, axis=1)


def double_occupancy_fs(state: FermiSeaState) -> float:
    return float(np.sum(site_density(state) ** 2))


@dataclass
class ExcitationSpectrum:
    omega: np.ndarray
    weight: np.ndarray
    reference_value: float
    reference_energy: float

    @property
    def peaks(self):
        return list(zip(self.omega.tolist(), self.weight.tolist()))

    @property
    def zero_weight(self) -> float:
        return float(np.sum(self.weight[np.abs(self.omega) <= 1e-12]))


def merge_peaks(omega, weight, tol=1e-12, prune=1e-14):
    """Sum weights of peaks whose frequencies agree within tol * max(1, max|omega|)."""
    omega = np.asarray(omega, dtype=float).ravel()
    weight = np.asarray(weight, dtype=float).ravel()
    if omega.size == 0:
        return omega, weight
    order = np.argsort(omega, kind="stable")
    w_sorted, x_sorted = weight[order], omega[order]
    scale = max(1.0, float(np.max(np.abs(x_sorted))))
    starts = np.concatenate(([0], np.flatnonzero(np.diff(x_sorted) > tol * scale) + 1))
    w = np.add.reduceat(w_sorted, starts)
    x = np.add.reduceat(x_sorted * w_sorted, starts)
    first = x_sorted[starts]
    x = np.where(w != 0, x / np.where(w != 0, w, 1), first)
    keep = np.abs(w) >= prune * np.max(np.abs(w))
    return x[keep], w[keep]


@dataclass
class RawExcitations:
    """Unmerged excitations with their level indices (-1 marks an unused slot)."""

    levels: np.ndarray  # (n, 4) columns l1, l2, l3, l4
    amplitude2: np.ndarray
    multiplicity: np.ndarray  # 1 for double pairs, 2 for single pairs (two spins)

    def omega(self, energies) -> np.ndarray:
        e = np.append(np.asarray(energies, dtype=float), 0.0)  # index -1 -> 0
        lv = self.levels
        return e[lv[:, 0]] - e[lv[:, 1]] + e[lv[:, 2]] - e[lv[:, 3]]


def enumerate_excitations(state: FermiSeaState, restrict_to=None,
                          allow_large=False) -> RawExcitations:
    """All one-pair and two-pair states reached by D from the Fermi sea.

    restrict_to: optional boolean mask of levels; only states touching at least
    one of these levels are kept (used by the fidelity, where only states with
    a modified level contribute).
    """
    V = state.basis.eigenvectors
    if V is None:
        raise ValueError("eigenvectors required")
    L = V.shape[0]
    if L > EXACT_L_MAX and not allow_large:
        raise ValueError(f"exact enumeration refused for L={L} > {EXACT_L_MAX}; "
                         "pass allow_large=True or use the averaged tier")
    occ, emp = state.occupied, state.empty
    if occ.size == 0 or emp.size == 0:
        return RawExcitations(np.zeros((0, 4), int), np.zeros(0), np.zeros(0, int))
    # pair (l1 empty, l2 filled) -> site profile a*_{i,l1} a_{i,l2}
    P = np.conj(V[:, emp])[:, :, None] * V[:, None, occ]
    P = P.reshape(L, -1)
    l1 = np.repeat(emp, occ.size)
    l2 = np.tile(occ, emp.size)
    rho = site_density(state)
    single_amp = np.abs(rho @ P) ** 2
    if restrict_to is None:
        sel = np.ones(l1.size, bool)
        D = np.abs(P.T @ P) ** 2
        a, b = np.indices(D.shape)
        a, b, d2 = a.ravel(), b.ravel(), D.ravel()
    else:
        hit = restrict_to[l1] | restrict_to[l2]
        sel = hit
        idx_hit = np.flatnonzero(hit)
        # states where the up pair or the down pair touches a restricted level
        D_hit = np.abs(P[:, idx_hit].T @ P) ** 2  # up pair restricted, down any
        a = np.repeat(idx_hit, l1.size)
        b = np.tile(np.arange(l1.size), idx_hit.size)
        d2 = D_hit.ravel()
        idx_free = np.flatnonzero(~hit)
        if idx_free.size and idx_hit.size:
            D_mix = np.abs(P[:, idx_free].T @ P[:, idx_hit]) ** 2  # up free, down restricted
            a = np.concatenate((a, np.repeat(idx_free, idx_hit.size)))
            b = np.concatenate((b, np.tile(idx_hit, idx_free.size)))
            d2 = np.concatenate((d2, D_mix.ravel()))
    lev_d = np.stack((l1[a], l2[a], l1[b], l2[b]), axis=1)
    lev_s = np.stack((l1[sel], l2[sel], np.full(sel.sum(), -1), np.full(sel.sum(), -1)), axis=1)
    return RawExcitations(np.concatenate((lev_d, lev_s)),
                          np.concatenate((d2, single_amp[sel])),
                          np.concatenate((np.ones(d2.size, int), np.full(sel.sum(), 2))))


def jomega_double_occupancy(state: FermiSeaState, U: float | None = None,
                            allow_large=False) -> ExcitationSpectrum:
    """Exact-tier peaks (omega_m, |<m|D|FS>|^2); U does not enter the weights."""
    raw = enumerate_excitations(state, allow_large=allow_large)
    e = state.basis.eigenvalues
    om, w = merge_peaks(raw.omega(e), raw.amplitude2 * raw.multiplicity)
    nz = np.abs(om) > 1e-12
    E0 = 2.0 * float(np.sum(e[state.occupations]))
    return ExcitationSpectrum(om[nz], w[nz], double_occupancy_fs(state), E0)


def plane_wave_basis(params: ModelParams) -> SpectrumResult:
    """Clean eigenbasis: a_{i,n} = exp(2 pi i i n / L)/sqrt(L), modes in FFT order."""
    L = params.L
    n = mode_indices(L)
    i = np.arange(L)
    V = np.exp(2j * np.pi * np.outer(i, n) / L) / np.sqrt(L)
    e = params.mu + params.M_alpha * dispersion(params).energies
    return SpectrumResult(e, V, 0.0, {"basis": "plane_wave"})


def jomega_momentum_clean(params: ModelParams, table=None, filling=None) -> ExcitationSpectrum:
    """Clean-ring peaks from momentum conservation l1 - l2 + l3 - l4 = 0 mod L.

    Every allowed state has |D_m|^2 = 1/L^2; single-pair amplitudes vanish.
    """
    if params.sigma != 0:
        raise ValueError("momentum path requires sigma = 0")
    L = params.L
    table = dispersion(params) if table is None else table
    e = params.mu + params.M_alpha * table.energies
    filling = L // 2 if filling is None else filling
    occ = occupation_mask(e, filling)
    E0 = 2.0 * float(np.sum(e[occ]))
    d0 = L * (filling / L) ** 2
    o, v = np.flatnonzero(occ), np.flatnonzero(~occ)
    if o.size == 0 or v.size == 0:
        return ExcitationSpectrum(np.zeros(0), np.zeros(0), d0, E0)
    # level index k equals (mode n mod L), so momentum transfer is (l1 - l2) mod L
    q = (v[:, None] - o[None, :]) % L
    de = (e[v][:, None] - e[o][None, :]).ravel()
    q = q.ravel()
    omegas, weights = [], []
    for qq in np.unique(q):
        up = de[q == qq]
        dn = de[q == (-qq) % L]
        if dn.size == 0:
            continue
        xu, cu = np.unique(up, return_counts=True)
        xd, cd = np.unique(dn, return_counts=True)
        omegas.append((xu[:, None] + xd[None, :]).ravel())
        weights.append((cu[:, None] * cd[None, :]).ravel() / L**2)
    om, w = merge_peaks(np.concatenate(omegas), np.concatenate(weights).astype(float))
    nz = np.abs(om) > 1e-12
    return ExcitationSpectrum(om[nz], w[nz], d0, E0)


def kernel(omega, t):
    """sin^2(omega t / 2) / omega^2 with the t^2/4 limit at omega = 0."""
    omega = np.asarray(omega, dtype=float)
    small = np.abs(omega) < 1e-12
    safe = np.where(small, 1.0, omega)
    return np.where(small, 0.25 * t * t, np.sin(0.5 * safe * t) ** 2 / safe**2)


@dataclass
class QuenchResult:
    times: np.ndarray
    values: np.ndarray
    plateau: float | None
    stderr: np.ndarray | None = None
    observable: str = "double_occupancy"
    params: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        se = np.zeros_like(self.values) if self.stderr is None else self.stderr
        lines = ["t,d,stderr"]
        for t, d, s in zip(self.times, self.values, se):
            lines.append(f"{t:.17g},{d:.17g},{s:.17g}")
        return "\n".join(lines) + "\n"

    def sidecar(self) -> str:
        meta = dict(observable=self.observable, plateau=self.plateau, params=self.params,
                    seeds=self.seeds, n_times=int(self.times.size))
        return json.dumps(meta, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def evolve_observable(spec: ExcitationSpectrum, U: float, times,
                      observable: str = "double_occupancy", chunk: int = 1 << 16) -> QuenchResult:
    """d(t) (linear in U) or the kinetic energy (exactly quadratic in U)."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    om, w = spec.omega, spec.weight
    acc = np.zeros(times.size)
    for s in range(0, om.size, chunk):
        o, ww = om[s:s + chunk], w[s:s + chunk]
        # omega * K(omega, t) -> 0 at omega = 0, so zero modes drop out
        acc += np.sum((ww * o)[None, :] * kernel(o[None, :], times[:, None]), axis=1)
    nz = np.abs(om) > 1e-12
    if observable == "double_occupancy":
        values = spec.reference_value - 4.0 * U * acc
        plateau = spec.reference_value - 2.0 * U * float(np.sum(w[nz] / om[nz]))
    elif observable == "kinetic":
        values = spec.reference_energy + 4.0 * U * U * acc
        plateau = spec.reference_energy + 2.0 * U * U * float(np.sum(w[nz] / om[nz]))
    else:
        raise ValueError(f"unknown observable {observable!r}")
    values[times == 0] = spec.reference_value if observable == "double_occupancy" else spec.reference_energy
    return QuenchResult(times, values, plateau, observable=observable)


# averaged tier ---------------------------------------------------------------

def haar_weights(L: int, filling: int) -> dict:
    """Leading-order ensemble averages of |D_m|^2 for random orthogonal eigenvectors.

    dd: all four levels distinct; c13: l1 = l3; c24: l2 = l4; both: l1 = l3 and
    l2 = l4; single: one-pair states; d0: average initial double occupancy.
    """
    p = filling / L
    var_rho = p * (1 - p) / (L / 2 + 1)
    return dict(
        dd=1.0 / L**3,
        c13=2.0 * (L - 1) / (L**2 * (L + 2) ** 2),
        c24=2.0 * (L - 1) / (L**2 * (L + 2) ** 2),
        both=1.0 / L**2,
        single=var_rho / L,
        d0=L * (p * p + var_rho),
    )


def realization_weights(eigenvectors, occupations) -> dict:
    """Exact class means of |D_m|^2 for one realization (real eigenvectors).

    With Q and Qb the projectors on filled and empty levels, every class total
    is a site double sum computable in O(L^3), e.g. the sum over all two-pair
    states is sum_ij Qb_ij^2 Q_ij^2. Dividing by the class sizes gives the
    weights used in place of the individual |D_m|^2.
    """
    V = np.asarray(eigenvectors)
    if np.iscomplexobj(V):
        if np.max(np.abs(V.imag), initial=0.0) > 1e-12:
            raise ValueError("class sums implemented for real eigenvectors")
        V = V.real
    occ = np.asarray(occupations, bool)
    O, E = V[:, occ], V[:, ~occ]
    no, nv = O.shape[1], E.shape[1]
    L = V.shape[0]
    Q, Qb = O @ O.T, E @ E.T
    O2, E2 = O * O, E * E
    rho = O2.sum(axis=1)
    total = np.sum((Q * Qb) ** 2)
    t13 = np.sum((E2 @ E2.T) * Q * Q)
    t24 = np.sum((O2 @ O2.T) * Qb * Qb)
    tb = np.sum((E2.T @ O2) ** 2)
    ts = np.sum((E.T @ (rho[:, None] * O)) ** 2)

    def mean(t, n):
        return float(t / n) if n > 0 else 0.0

    return dict(
        dd=mean(total - t13 - t24 + tb, nv * (nv - 1) * no * (no - 1)),
        c13=mean(t13 - tb, nv * no * (no - 1)),
        c24=mean(t24 - tb, nv * (nv - 1) * no),
        both=mean(tb, nv * no),
        single=mean(ts, nv * no),
        d0=float(np.sum(rho**2)),
        L=L,
    )


@dataclass
class AveragedSpectrum:
    energies: np.ndarray
    occupations: np.ndarray
    weights: dict
    moments: str = "haar"

    @property
    def L(self) -> int:
        return self.energies.size

    @property
    def reference_value(self) -> float:
        return self.weights["d0"]

    @property
    def reference_energy(self) -> float:
        return 2.0 * float(np.sum(self.energies[self.occupations]))


def averaged_spectrum(energies, filling=None, eigenvectors=None) -> AveragedSpectrum:
    """Sampled eigenvalues with class-averaged weights.

    With eigenvectors the class means of this realization are used (and d0 is
    exact); without them the leading random-unit-vector moments stand in.
    """
    e = np.asarray(energies, dtype=float)
    filling = e.size // 2 if filling is None else filling
    occ = occupation_mask(e, filling)
    if eigenvectors is None:
        return AveragedSpectrum(e, occ, haar_weights(e.size, filling), "haar")
    return AveragedSpectrum(e, occ, realization_weights(eigenvectors, occ), "realization")


def _phase_sums(avg: AveragedSpectrum, tau):
    """Sum over pair classes of weight * exp(i omega tau), tau may be complex."""
    e = avg.energies
    # reference energy between the filled and empty levels keeps every exponent bounded
    filled, empty = e[avg.occupations], e[~avg.occupations]
    mu = 0.5 * (filled.max() + empty.min()) if filled.size and empty.size else 0.0
    ev = e[~avg.occupations] - mu
    eo = e[avg.occupations] - mu
    tau = np.asarray(tau, dtype=complex)

    def s(levels, sign, factor=1.0):
        return np.exp(sign * 1j * factor * np.outer(tau, levels)).sum(axis=1)

    A, B = s(ev, 1), s(eo, -1)
    A2, B2 = s(ev, 1, 2.0), s(eo, -1, 2.0)
    w = avg.weights
    double = (w["dd"] * (A * A * B * B - A2 * B * B - A * A * B2 + A2 * B2)
              + w["c13"] * (A2 * B * B - A2 * B2)
              + w["c24"] * (A * A * B2 - A2 * B2)
              + w["both"] * A2 * B2)
    return double + 2.0 * w["single"] * A * B


def _omega_max(avg: AveragedSpectrum) -> float:
    e = avg.energies
    return 2.0 * float(np.ptp(e)) if e.size > 1 else 0.0


def evolve_averaged(avg: AveragedSpectrum, U: float, times,
                    observable: str = "double_occupancy", step=None) -> QuenchResult:
    """Averaged-tier evolution.

    The double occupancy needs sum_m w (1 - cos omega t)/omega, obtained as the
    running integral of sum_m w sin(omega tau) on a fine grid (Simpson) and
    then interpolated to the requested times. The kinetic energy follows from
    energy conservation, E_kin(t) = E0 + U (d0 - d(t)).
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    if observable == "kinetic":
        d = evolve_averaged(avg, U, times, "double_occupancy", step)
        values = avg.reference_energy + U * (avg.reference_value - d.values)
        plateau = avg.reference_energy + U * (avg.reference_value - d.plateau)
        return QuenchResult(times, values, plateau, observable=observable)
    if observable != "double_occupancy":
        raise ValueError(f"unknown observable {observable!r}")
    t_max = float(np.max(times, initial=0.0))
    if step is None:
        step = min(0.01, 0.05 / max(_omega_max(avg), 1e-9))
    n = max(int(np.ceil(t_max / step)), 2)
    n += n % 2
    fine = np.linspace(0.0, t_max, n + 1)
    f = _phase_sums(avg, fine).imag
    cum = cumulative_simpson(f, x=fine, initial=0.0)
    values = avg.reference_value - 2.0 * U * CubicSpline(fine, cum)(times)
    values[times == 0] = avg.reference_value
    return QuenchResult(times, values, averaged_plateau(avg, U), observable=observable)


def averaged_plateau(avg: AveragedSpectrum, U: float) -> float:
    """d0 - 2U sum_m w/omega, with 1/omega = int_0^inf exp(-omega s) ds (all omega > 0)."""
    e = avg.energies
    occ = avg.occupations
    if occ.all() or not occ.any():
        return avg.reference_value
    gap = float(np.min(e[~occ]) - np.max(e[occ]))
    if gap <= 0:
        return float("nan")
    # log-spaced quadrature in s; the integrand decays like exp(-2 gap s)
    u = np.linspace(np.log(1e-6 / max(_omega_max(avg), 1.0)), np.log(60.0 / gap), 6001)
    s = np.exp(u)
    vals = _phase_sums(avg, 1j * s).real * s  # exp(i omega tau) at tau = i s is exp(-omega s)
    return avg.reference_value - 2.0 * U * float(np.trapezoid(vals, u))


# ensembles -------------------------------------------------------------------

def time_grid(t_max: float = 10.0, n: int = 512) -> np.ndarray:
    return np.linspace(0.0, t_max, n)


def quench_realization(params: ModelParams, times, realization_index=0, tier="auto",
                       model="independent", observable="double_occupancy") -> QuenchResult:
    from .disorder import make_spec, sample
    from .spectral import eigensolve

    if tier == "auto":
        tier = "exact" if params.L <= EXACT_L_MAX else "averaged"
    spec = make_spec(params, model, realization_index)
    H = sample(params, spec)
    seeds = dict(seed=params.seed, realization_index=realization_index)
    if tier == "exact":
        res = eigensolve(H, want_vectors=True, meta=seeds)
        q = evolve_observable(jomega_double_occupancy(build_fermi_sea(res, params.L // 2)),
                              params.U, times, observable)
    elif tier == "averaged":
        res = eigensolve(H, want_vectors=True, meta=seeds)
        q = evolve_averaged(averaged_spectrum(res.eigenvalues, eigenvectors=res.eigenvectors),
                            params.U, times, observable)
    else:
        raise ValueError(f"unknown tier {tier!r}")
    q.seeds = seeds
    q.params = _params_dict(params)
    return q


def _params_dict(params: ModelParams) -> dict:
    from dataclasses import asdict
    return asdict(params)


def ensemble_quench(params: ModelParams, n_realizations: int, times, tier="auto",
                    model="independent", workers: int = 1,
                    observable="double_occupancy") -> QuenchResult:
    """Mean and standard error over realizations 0..n-1 of the seed family."""
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    times = np.asarray(times, dtype=float)

    def run(k):
        try:
            return quench_realization(params, times, k, tier, model, observable)
        except Exception as exc:  # surface the failing sub-seed
            raise RuntimeError(f"realization {k} (seed {params.seed}) failed: {exc}") from exc

    if workers > 1 and n_realizations > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(run, range(n_realizations)))
    else:
        runs = [run(k) for k in range(n_realizations)]
    stack = np.stack([r.values for r in runs])
    # deviations from the first run keep identical realizations exact (zero error)
    dev = stack - stack[0]
    mean = stack[0] + dev.mean(axis=0)
    se = dev.std(axis=0, ddof=1) / np.sqrt(n_realizations) if n_realizations > 1 else np.zeros_like(mean)
    plateaus = [r.plateau for r in runs if r.plateau is not None]
    plateau = float(np.mean(plateaus)) if len(plateaus) == n_realizations else None
    return QuenchResult(times, mean, plateau, se, observable, _params_dict(params),
                        dict(seed=params.seed, realizations=list(range(n_realizations))))


def late_window_std(result: QuenchResult, t_lo=5.0, t_hi=10.0) -> float:
    m = (result.times >= t_lo) & (result.times <= t_hi)
    return float(np.std(result.values[m]))


def secular_check(spec: ExcitationSpectrum) -> None:
    total = float(np.sum(np.abs(spec.weight))) or 1.0
    if spec.zero_weight > 1e-12 * total:
        warnings.warn("significant zero-frequency weight", RuntimeWarning)
