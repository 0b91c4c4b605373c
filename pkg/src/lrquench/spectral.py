"""Dense eigensolves, the predicted disordered DOS and predicted-vs-empirical comparison.

The bulk of a sampled matrix follows the semicircle of radius 2J. A clean mode
with |theta_n| = |M_alpha eps_n| > J is expelled from the bulk to

    lambda_n = theta_n + J^2 / theta_n,

all other modes are absorbed into the bulk.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import DispersionTable, ModelParams


class EigensolveError(RuntimeError):
    pass


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    residual_bound: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.eigenvalues.size


def eigensolve(matrix, want_vectors: bool = True, meta: dict | None = None) -> SpectrumResult:
    """Full symmetric eigendecomposition (LAPACK syevr through scipy).

    Residuals ||Mv - lambda v|| are checked against 1e-8 ||M||_F and the
    columns against orthonormality when vectors are requested.
    """
    M = np.asarray(matrix, dtype=float)
    meta = dict(meta or {})
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12:
        raise ValueError("matrix is not symmetric within 1e-12")
    try:
        if want_vectors:
            w, V = scipy.linalg.eigh(M, driver="evr")
        else:
            w, V = scipy.linalg.eigh(M, eigvals_only=True, driver="evr"), None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveError(f"eigensolve failed ({meta}): {exc}") from exc
    bound = 0.0
    if V is not None:
        fro = np.linalg.norm(M) or 1.0
        bound = float(np.max(np.linalg.norm(M @ V - V * w, axis=0), initial=0.0) / fro)
        ortho = float(np.max(np.abs(V.T @ V - np.eye(len(w))), initial=0.0))
        if bound > 1e-8 or ortho > 1e-8:
            raise EigensolveError(f"residual {bound:.3g} / orthogonality {ortho:.3g} too large ({meta})")
    return SpectrumResult(w, V, bound, meta)


def semicircle_density(lam, J: float):
    if J <= 0:
        raise ValueError("J must be > 0")
    lam = np.asarray(lam, dtype=float)
    inside = np.abs(lam) <= 2 * J
    val = np.sqrt(np.clip(4 * J * J - lam * lam, 0, None)) / (2 * np.pi * J * J)
    return np.where(inside, val, 0.0)


def semicircle_cdf(lam, J: float):
    if J <= 0:
        raise ValueError("J must be > 0")
    x = np.clip(np.asarray(lam, dtype=float), -2 * J, 2 * J)
    val = 0.5 + x * np.sqrt(np.clip(4 * J * J - x * x, 0, None)) / (4 * np.pi * J * J) \
        + np.arcsin(x / (2 * J)) / np.pi
    return np.clip(val, 0.0, 1.0)


def semicircle_ppf(q, J: float):
    """Inverse CDF by bisection, used for inverse-transform sampling."""
    q = np.asarray(q, dtype=float)
    lo = np.full(q.shape, -2.0 * J)
    hi = np.full(q.shape, 2.0 * J)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid, J) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


@dataclass
class PredictedDOS:
    J: float
    outliers: list  # (mode n, lambda_n)
    epsilon_star: float

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([lam for _, lam in self.outliers], dtype=float)


def outlier_position(theta, J: float):
    theta = np.asarray(theta, dtype=float)
    return theta + J * J / theta


def predicted_dos(params: ModelParams, table: DispersionTable) -> PredictedDOS:
    """Outliers lambda_n for every mode with |M_alpha eps_n| > J.

    J here is the bulk radius parameter of the sampled matrix, sigma * J.
    A nonzero mu shifts every outlier by mu.
    """
    if params.alpha >= 1:
        raise ValueError("the outlier prediction holds for alpha < 1 only")
    if params.M_alpha == 0:
        return PredictedDOS(params.J_eff, [], float("inf"))
    J = params.J_eff
    if J <= 0:
        raise ValueError("sigma * J must be > 0")
    theta = params.M_alpha * table.energies
    keep = np.abs(theta) > J
    out = [(int(n), float(params.mu + outlier_position(t, J)))
           for n, t in zip(table.modes[keep], theta[keep])]
    out.sort(key=lambda p: (p[1], p[0]))
    return PredictedDOS(J, out, J / params.M_alpha)


def ks_distance(samples, cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        return float("nan")
    F = cdf(x)
    up = np.arange(1, n + 1) / n - F
    down = F - np.arange(n) / n
    return float(max(up.max(), down.max()))


def greedy_match(predicted, empirical):
    """Greedy nearest-neighbour matching, each empirical value used once.

    Candidate pairs are taken in order of increasing distance; ties go to the
    smaller empirical value, then the smaller predicted value. Returns the
    matched empirical index per prediction (-1 if none).
    """
    p = np.asarray(predicted, dtype=float)
    e = np.asarray(empirical, dtype=float)
    match = np.full(p.size, -1, dtype=int)
    if p.size == 0 or e.size == 0:
        return match
    dist = np.abs(p[:, None] - e[None, :])
    ip, ie = np.meshgrid(np.arange(p.size), np.arange(e.size), indexing="ij")
    order = np.lexsort((p[ip].ravel(), e[ie].ravel(), dist.ravel()))
    used_e = np.zeros(e.size, bool)
    for k in order:
        a, b = ip.flat[k], ie.flat[k]
        if match[a] < 0 and not used_e[b]:
            match[a] = b
            used_e[b] = True
    return match


@dataclass
class ComparisonReport:
    J: float
    margin: float
    n_eigenvalues: int
    n_bulk: int
    ks: float
    predicted: np.ndarray
    matched: np.ndarray  # nan where unmatched
    rel_error: np.ndarray  # inf where unmatched
    unmatched_predicted: int
    unmatched_empirical_low: int
    unmatched_empirical_high: int
    warnings: list = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return float(np.max(self.rel_error, initial=0.0))

    @property
    def mismatch(self) -> bool:
        return bool(self.unmatched_predicted or self.unmatched_empirical_low
                    or self.unmatched_empirical_high or self.n_bulk == 0)

    def all_matched_within(self, tol: float) -> bool:
        return self.unmatched_predicted == 0 and self.max_rel_error <= tol

    def to_text(self) -> str:
        rows = [
            ("J", self.J), ("margin", self.margin), ("n_eigenvalues", self.n_eigenvalues),
            ("n_bulk", self.n_bulk), ("ks_bulk", self.ks),
            ("n_predicted_outliers", self.predicted.size),
            ("unmatched_predicted", self.unmatched_predicted),
            ("unmatched_empirical_low", self.unmatched_empirical_low),
            ("unmatched_empirical_high", self.unmatched_empirical_high),
            ("max_rel_error", self.max_rel_error), ("mismatch", self.mismatch),
        ]
        lines = [f"{k} = {_fmt(v)}" for k, v in rows]
        lines += [f"warning = {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["predicted_lambda,matched_lambda,rel_error"]
        for p, m, r in zip(self.predicted, self.matched, self.rel_error):
            lines.append(f"{_fmt(p)},{_fmt(m)},{_fmt(r)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def compare_spectrum(result: SpectrumResult, predicted: PredictedDOS,
                     margin: float | None = None) -> ComparisonReport:
    J = predicted.J
    margin = 0.05 * J if margin is None else margin
    if margin < 0:
        raise ValueError("margin must be >= 0")
    ev = np.asarray(result.eigenvalues, dtype=float)
    in_bulk = np.abs(ev) <= 2 * J + margin
    bulk, outl = ev[in_bulk], ev[~in_bulk]
    warnings = []
    if bulk.size == 0:
        warnings.append("empty bulk")
        ks = float("nan")
    else:
        ks = ks_distance(bulk, lambda x: semicircle_cdf(x, J))
        if np.ptp(bulk) < 1e-9 * max(J, 1.0):
            warnings.append("degenerate bulk (no disorder spread)")
    lam = predicted.lambdas
    idx = greedy_match(lam, outl)
    ok = idx >= 0
    matched = np.where(ok, outl[np.maximum(idx, 0)] if outl.size else np.nan, np.nan)
    rel = np.where(ok, np.abs(matched - lam) / np.abs(lam), np.inf)
    used = np.zeros(outl.size, bool)
    used[idx[ok]] = True
    spare = outl[~used]
    return ComparisonReport(J, margin, ev.size, bulk.size, ks, lam, matched, rel,
                            int(np.sum(~ok)), int(np.sum(spare < 0)), int(np.sum(spare > 0)),
                            warnings)


def histogram(eigenvalues, bins="fd"):
    """Freedman-Diaconis histogram normalized to a density (plots only)."""
    return np.histogram(np.asarray(eigenvalues, dtype=float), bins=bins, density=True)
