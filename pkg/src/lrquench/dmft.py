"""Matsubara Green functions, Hilbert transforms and Weiss-field relations.

For a density of states D the local Green function is G = rho~(xi) with
xi = i omega + mu - Sigma and rho~(xi) = int D(e)/(xi - e) de. Inverting,
xi = R[G], and the Weiss field is

    G0^-1 = i omega + mu + 1/G - R[G].

Three DOS models are covered: a flat long-range spectrum (one level eps0 plus
an accumulation point at zero), the semicircle, and the semicircle plus a
finite set of outliers. Only the form of these relations is checked; there is
no impurity solver and no self-consistency loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MatsubaraGrid:
    beta: float = 64.0
    n_max: int = 512

    def __post_init__(self):
        if self.beta <= 0 or self.n_max < 1:
            raise ValueError("beta must be > 0 and n_max >= 1")

    @property
    def frequencies(self) -> np.ndarray:
        return (2 * np.arange(self.n_max) + 1) * np.pi / self.beta


@dataclass
class GreenFunction:
    grid: MatsubaraGrid
    values: np.ndarray

    def to_csv(self) -> str:
        lines = ["n,omega_n,re,im"]
        for n, (w, g) in enumerate(zip(self.grid.frequencies, self.values)):
            lines.append(f"{n},{w:.17g},{g.real:.17g},{g.imag:.17g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DOSModel:
    """One of ``flat_lr``, ``semicircle`` or ``mixed``; use the constructors."""

    kind: str
    J: float = 1.0
    eps0: float = 0.0
    N: int = 2
    outliers: tuple = field(default=())

    @classmethod
    def flat_lr(cls, eps0: float, N: int) -> "DOSModel":
        if N < 2:
            raise ValueError("N must be >= 2")
        return cls("flat_lr", eps0=float(eps0), N=int(N))

    @classmethod
    def semicircle(cls, J: float) -> "DOSModel":
        if J <= 0:
            raise ValueError("J must be > 0")
        return cls("semicircle", J=float(J))

    @classmethod
    def mixed(cls, J: float, outliers, N: int) -> "DOSModel":
        if J <= 0 or N < 2:
            raise ValueError("mixed model needs J > 0 and N >= 2")
        out = tuple(float(x) for x in outliers)
        if len(out) >= N:
            raise ValueError("more outliers than levels")
        return cls("mixed", J=float(J), N=int(N), outliers=out)


def _semicircle_ht(xi, J):
    xi = np.asarray(xi, dtype=complex)
    root = np.sqrt(xi * xi - 4 * J * J)
    # pick the sheet with rho~ ~ 1/xi at large |xi|, i.e. root ~ xi
    root = np.where((root.real * xi.real + root.imag * xi.imag) < 0, -root, root)
    # 2/(xi + root) equals (xi - root)/(2 J^2) without the large-|xi| cancellation
    return 2 / (xi + root)


def _semicircle_ht_prime(xi, J):
    xi = np.asarray(xi, dtype=complex)
    g = _semicircle_ht(xi, J)
    # from J^2 g^2 - xi g + 1 = 0
    return g * g / (J * J * g * g - 1)


def hilbert_transform(model: DOSModel, xi):
    xi = np.asarray(xi, dtype=complex)
    if model.kind == "flat_lr":
        N = model.N
        return (1 / N) / (xi - model.eps0) + ((N - 1) / N) / xi
    if model.kind == "semicircle":
        if np.any((xi.imag == 0) & (np.abs(xi.real) < 2 * model.J)):
            raise ValueError("real argument inside the semicircle support")
        return _semicircle_ht(xi, model.J)
    if model.kind == "mixed":
        N, out = model.N, np.asarray(model.outliers)
        bulk = 1 - out.size / N
        val = bulk * _semicircle_ht(xi, model.J)
        for lam in out:
            val = val + (1 / N) / (xi - lam)
        return val
    raise ValueError(f"unknown DOS model {model.kind!r}")


def hilbert_transform_prime(model: DOSModel, xi):
    xi = np.asarray(xi, dtype=complex)
    if model.kind == "semicircle":
        return _semicircle_ht_prime(xi, model.J)
    if model.kind == "mixed":
        N, out = model.N, np.asarray(model.outliers)
        val = (1 - out.size / N) * _semicircle_ht_prime(xi, model.J)
        for lam in out:
            val = val - (1 / N) / (xi - lam) ** 2
        return val
    if model.kind == "flat_lr":
        N = model.N
        return -(1 / N) / (xi - model.eps0) ** 2 - ((N - 1) / N) / xi ** 2
    raise ValueError(f"unknown DOS model {model.kind!r}")


def reciprocal_semicircle(g, J: float = 1.0):
    """R[G] = J^2 G + 1/G; valid on the image of the semicircle transform."""
    g = np.asarray(g, dtype=complex)
    if np.any(g == 0):
        raise ValueError("G = 0 has no reciprocal")
    return J * J * g + 1 / g


class NewtonError(RuntimeError):
    pass


def invert_hilbert(model: DOSModel, g, xi0=None, tol=1e-10, max_iter=100):
    """Solve rho~(xi) = g for xi by Newton iteration (scalar g)."""
    g = complex(g)
    xi = complex(reciprocal_semicircle(g, model.J) if xi0 is None else xi0)
    res = np.inf
    f = complex(hilbert_transform(model, xi)) - g
    res = abs(f)
    for _ in range(max_iter):
        if res <= tol:
            return xi
        step = f / complex(hilbert_transform_prime(model, xi))
        # backtracking keeps |f| decreasing; far from the root plain Newton can run away
        for _ in range(40):
            trial = xi - step
            f_new = complex(hilbert_transform(model, trial)) - g
            if abs(f_new) < res:
                break
            step = step / 2
        xi, f, res = trial, f_new, abs(f_new)
    raise NewtonError(f"no convergence: G={g!r}, last xi={xi!r}, residual={res:.3g}")


def _flat_roots(G, eps0, N):
    G = complex(G)
    disc = np.sqrt(complex((eps0 - N + eps0 * N * G) ** 2 + 4 * eps0 * N))
    base = N + eps0 + eps0 * N * G
    return (base - disc) / (2 * N * G), (base + disc) / (2 * N * G)


def reciprocal_flat(G, eps0: float, N: int, kac: bool = True) -> complex:
    """Closed-form R[G] for the flat long-range DOS.

    Of the two square-root sheets the one tending to 1/G as N grows is kept,
    which is the sheet continuous in N. Without Kac rescaling the isolated
    level scales with the size, eps0 -> N eps0.
    """
    G = complex(G)
    if G == 0:
        raise ValueError("G must be nonzero")
    if N < 2:
        raise ValueError("N must be >= 2")
    e = eps0 * N if not kac else eps0
    r1, r2 = _flat_roots(G, e, N)
    return r1 if abs(r1 - 1 / G) <= abs(r2 - 1 / G) else r2


def flat_correction_asymptote(G, eps0: float, N: int, kac: bool = True) -> complex:
    """Leading large-N term of G0^-1 - (i omega + mu) for the flat model."""
    G = complex(G)
    if kac:
        return eps0 / (N * G * (eps0 * G - 1))
    return 1 / (N * G * G)


def weiss_field_flat(G, eps0, N, mu, omega, kac=True, check=True) -> complex:
    if eps0 == 0:
        return complex(1j * omega + mu)
    val = 1j * omega + mu + 1 / complex(G) - reciprocal_flat(G, eps0, N, kac)
    if check:
        # the chosen sheet must follow the large-N asymptote
        n_ref = 2 ** 12
        corr = 1 / complex(G) - reciprocal_flat(G, eps0, n_ref, kac)
        ref = flat_correction_asymptote(G, eps0, n_ref, kac)
        if abs(corr - ref) > 0.05 * abs(ref) + 1e-14:
            raise ArithmeticError(f"flat Weiss field: wrong square-root sheet (G={G!r})")
    return val


def weiss_field_semicircle(G, J, mu, omega):
    return 1j * omega + mu - J * J * np.asarray(G, dtype=complex)


def weiss_field_mixed(G, model: DOSModel, mu, omega) -> complex:
    if model.kind != "mixed":
        raise ValueError("weiss_field_mixed needs a mixed DOS model")
    if not model.outliers:
        return complex(weiss_field_semicircle(G, model.J, mu, omega))
    xi = invert_hilbert(model, G)
    return complex(1j * omega + mu + 1 / complex(G) - xi)


def self_energy(G0: GreenFunction, G: GreenFunction) -> GreenFunction:
    if G0.grid != G.grid:
        raise ValueError("Green functions live on different grids")
    a, b = np.asarray(G0.values), np.asarray(G.values)
    if np.any(a == 0) or np.any(b == 0):
        raise ValueError("zero Green-function value")
    return GreenFunction(G.grid, 1 / a - 1 / b)


def power_law_exponent(N, values) -> float:
    """Least-squares slope of log|values| against log N."""
    x = np.log(np.asarray(N, dtype=float))
    y = np.log(np.abs(np.asarray(values)))
    return float(np.polyfit(x, y, 1)[0])


def flat_corrections(G, eps0, Ns, mu=0.0, omega=1.0, kac=True):
    base = 1j * omega + mu
    return np.array([weiss_field_flat(G, eps0, N, mu, omega, kac) - base for N in Ns])


def mixed_corrections(G, J, outliers, Ns, mu=0.0, omega=1.0):
    sc = complex(weiss_field_semicircle(G, J, mu, omega))
    return np.array([weiss_field_mixed(G, DOSModel.mixed(J, outliers, N), mu, omega) - sc
                     for N in Ns])
