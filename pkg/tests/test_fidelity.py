import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from lrquench import ed_oracle as ed
from lrquench import fidelity as fd
from lrquench.disorder import make_spec
from lrquench.model import ModelParams, dispersion
from lrquench.spectral import SpectrumResult, eigensolve, predicted_dos

TIMES = np.linspace(0, 10, 64)


def test_replace_extremes():
    eps = np.array([0.3, -1.0, 1.2, 0.0, -0.4, 0.8])
    new, idx = fd.replace_extremes(eps, [3.0, 2.5, -2.8])
    assert idx.tolist() == [1, 2, 5]
    assert new[2] == 3.0 and new[5] == 2.5 and new[1] == -2.8
    np.testing.assert_array_equal(np.argsort(new), np.argsort(eps))
    with pytest.raises(ValueError):
        fd.replace_extremes([0.0], [1.0, 2.0])


def test_gfun_and_bracket():
    assert complex(fd.gfun(0.0, 2.0)) == -2j
    assert complex(fd.gfun(1e-9, 2.0)) == pytest.approx(-2j, abs=1e-8)
    w, wp, t = 1.3, -0.4, 2.7
    s = lambda x: np.sin(x * t / 2) ** 2 / x ** 2
    expect = s(w) + s(wp) - 2 * np.cos((w - wp) * t / 2) * np.sin(w * t / 2) * np.sin(wp * t / 2) / (w * wp)
    assert float(fd.bracket(w, wp, t)) == pytest.approx(expect, rel=1e-12)
    assert float(fd.bracket(w, w, t)) == 0.0


def pair_for(L, M, seed=0, k=0):
    p = ModelParams(L=L, alpha=0.5, M_alpha=M, seed=seed)
    return p, fd.paired_spectra(p, make_spec(p, "independent", k))


def test_paired_spectra_clean_limit_is_identical():
    _, pair = pair_for(64, 0.0)
    assert pair.identical and pair.modified_indices.size == 0
    np.testing.assert_array_equal(pair.eps, pair.eps_prime)


def test_paired_spectra_outlier_count():
    p, pair = pair_for(64, -2 * np.pi)
    pred = predicted_dos(p, dispersion(p))
    assert pair.modified_indices.size == len(pred.outliers) > 0
    # outliers outside the bulk keep the level ordering
    assert np.all(np.diff(pair.eps_prime[np.argsort(pair.eps)]) >= 0)


def test_pair_rejects_foreign_modification():
    eps = np.array([-1.0, 0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        fd.SpectrumPair(eps, eps + [0, 0, 1, 0], SpectrumResult(eps), np.array([3]))


@pytest.mark.parametrize("coeffs", ["exact", "averaged"])
def test_trivial_cases_have_unit_fidelity(coeffs):
    p, pair = pair_for(32, -2 * np.pi)
    r = fd.fidelity_series(pair, coeffs, 1.0, TIMES)
    assert r.F[0] == 1.0 and np.all((r.F >= 0) & (r.F <= 1))
    assert np.all(fd.fidelity_series(pair, coeffs, 0.0, TIMES).F == 1.0)
    same = fd.SpectrumPair(pair.eps, pair.eps.copy(), pair.basis, pair.modified_indices)
    np.testing.assert_allclose(fd.fidelity_series(same, coeffs, 1.0, TIMES).F, 1.0, atol=1e-15)


def ed_pair(L, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(L, L)) / np.sqrt(L)
    e, V = np.linalg.eigh((A + A.T) / 2)
    ep = e.copy()
    ep[-1] += 2.0
    ep[0] -= 1.5
    pair = fd.SpectrumPair(e, ep, SpectrumResult(e, V), np.array([0, L - 1]))
    return pair, V @ np.diag(e) @ V.T, V @ np.diag(ep) @ V.T


@pytest.mark.parametrize("L", [4, 6])
def test_second_order_against_exact_diagonalization(L):
    # with a shared eigenvector basis the only gap is the third-order remainder
    pair, T0, Ta = ed_pair(L, L)
    t = np.linspace(0, 3, 16)
    errs = []
    for U in (0.1, 0.05):
        pt = 1 - fd.fidelity_series(pair, "exact", U, t).one_minus_F_raw
        exact = ed.quench_fidelity(T0, Ta, pair.basis.eigenvectors, pair.eps, U, t)
        errs.append(np.max(np.abs(pt - exact)))
    assert errs[0] / errs[1] > 6


def test_coefficient_override_matches_exact():
    pair, _, _ = ed_pair(6, 1)
    a = fd.fidelity_series(pair, "exact", 0.3, TIMES).F
    b = fd.fidelity_series(pair, pair.basis.eigenvectors, 0.3, TIMES).F
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        fd.fidelity_series(pair, np.eye(3), 0.3, TIMES)
    with pytest.raises(ValueError):
        fd.fidelity_series(pair, "bogus", 0.3, TIMES)


def test_averaged_tracks_exact():
    p = ModelParams(L=32, alpha=0.5, M_alpha=-2 * np.pi, U=1.0, seed=0)
    t = np.linspace(0, 10, 128)
    for k in range(3):
        a = fd.fidelity_realization(p, k, t, "exact").one_minus_F_raw
        b = fd.fidelity_realization(p, k, t, "averaged").one_minus_F_raw
        assert np.max(np.abs(a - b)) < 0.1 * a.max()


def test_realization_metadata_and_csv():
    p = ModelParams(L=16, alpha=0.5, M_alpha=-2 * np.pi, seed=3)
    r = fd.fidelity_realization(p, 2, [0.0, 0.5])
    assert r.seeds["realization_index"] == 2 and r.seeds["seed"] == 3
    lines = r.to_csv().splitlines()
    assert lines[0] == "t,F" and lines[1] == "0,1" and len(lines) == 3


def test_porter_thomas_moments():
    for k, m in [(0, 1.0), (1, 1.0), (2, 3.0)]:
        assert quad(lambda z: z ** k * fd.porter_thomas_pdf(z), 0, np.inf)[0] == pytest.approx(m, rel=1e-8)
    with pytest.raises(ValueError):
        fd.porter_thomas_pdf(0.0)


def test_finite_l_law_normalized_and_converges():
    assert quad(lambda z: fd.finite_l_pdf(z, 5), 0, 5)[0] == pytest.approx(1.0, rel=1e-8)
    assert fd.finite_l_pdf(0.7, 4096) == pytest.approx(fd.porter_thomas_pdf(0.7), rel=1e-3)


def test_sampled_components():
    z = fd.sample_unit_vector_component(1024, 100_000, seed=1)
    assert z.mean() == pytest.approx(1.0, abs=0.02)
    assert stats.kstest(z, fd.porter_thomas_cdf).statistic < 0.01
    z3 = fd.sample_unit_vector_component(3, 100_000, seed=2)
    assert stats.kstest(z3, lambda x: fd.finite_l_cdf(x, 3)).statistic < 0.02
    with pytest.raises(ValueError):
        fd.sample_unit_vector_component(2, 10)


def test_eigenvector_components_are_porter_thomas():
    p = ModelParams(L=256, M_alpha=0.0, seed=4)
    from lrquench.disorder import sample
    V = eigensolve(sample(p, make_spec(p, "independent"))).eigenvectors
    z = 256 * V[:, 100:156].ravel() ** 2
    assert stats.kstest(z, lambda x: fd.finite_l_cdf(x, 256)).statistic < 0.02
