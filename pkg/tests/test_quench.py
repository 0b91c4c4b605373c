import numpy as np
import pytest

from lrquench import ed_oracle as ed
from lrquench import quench
from lrquench.disorder import make_spec, sample
from lrquench.model import ModelParams, build_clean_hopping_matrix
from lrquench.quench import ExcitationSpectrum
from lrquench.spectral import SpectrumResult, eigensolve

TIMES = np.linspace(0.0, 10.0, 201)


def clean_l4():
    p = ModelParams(L=4, alpha=0.5, M_alpha=1.0, sigma=0.0, kac=False)
    return p, build_clean_hopping_matrix(p), quench.plane_wave_basis(p)


def disordered(L, seed=3, M=0.0):
    p = ModelParams(L=L, alpha=0.5, M_alpha=M, sigma=1.0, seed=seed)
    H = sample(p, make_spec(p))
    return p, H, eigensolve(H)


def test_occupation_mask_ties_and_bounds():
    assert quench.occupation_mask([0.0, -1.0, 0.0, 0.0], 2).tolist() == [True, True, False, False]
    assert quench.occupation_mask([1.0, 2.0], 2).all()
    with pytest.raises(ValueError):
        quench.occupation_mask([1.0], 2)


def test_l4_clean_occupies_modes_0_and_2():
    _, _, pw = clean_l4()
    st = quench.build_fermi_sea(pw, 2)
    assert st.occupied.tolist() == [0, 2]


def test_initial_double_occupancy():
    _, _, pw = clean_l4()
    assert quench.double_occupancy_fs(quench.build_fermi_sea(pw, 2)) == pytest.approx(1.0)  # L / 4
    assert quench.double_occupancy_fs(quench.build_fermi_sea(pw, 0)) == 0.0
    p2 = ModelParams(L=2, sigma=0.0, M_alpha=1.0, kac=False)
    assert quench.double_occupancy_fs(quench.build_fermi_sea(quench.plane_wave_basis(p2), 1)) == pytest.approx(0.5)


def test_full_filling_has_no_peaks():
    _, _, pw = clean_l4()
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(pw, 4))
    assert sp.omega.size == 0


def brute_force_peaks(T, V, e, filling):
    """Project D|FS> on the many-body eigenbasis of H0 and group by excitation energy."""
    L = T.shape[0]
    b = ed.build_basis(L, filling, filling)
    occ = V[:, np.argsort(e, kind="stable")[:filling]]
    psi = ed.slater_state(occ, occ, b)
    H0 = ed.build_many_body_hamiltonian(T, 0.0, b)
    w, W = np.linalg.eigh(H0)
    E0 = float(np.real(psi.conj() @ H0 @ psi))
    amp = np.abs(W.conj().T @ (ed.double_occupancy_operator(b) * psi)) ** 2
    om = w - E0
    keep = np.abs(om) > 1e-9
    return quench.merge_peaks(om[keep], amp[keep], tol=1e-9)


def test_peaks_match_brute_force_clean_l4():
    _, T, pw = clean_l4()
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(pw, 2))
    om, w = brute_force_peaks(T, pw.eigenvectors, pw.eigenvalues, 2)
    np.testing.assert_allclose(sp.omega, om, atol=1e-10)
    np.testing.assert_allclose(sp.weight, w, atol=1e-12)


def test_peaks_match_brute_force_disordered_l6():
    _, H, res = disordered(6)
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(res, 3))
    om, w = brute_force_peaks(H, res.eigenvectors, res.eigenvalues, 3)
    np.testing.assert_allclose(sp.omega, om, atol=1e-9)
    np.testing.assert_allclose(sp.weight, w, atol=1e-12)


def test_weight_sum_rule_is_variance_of_D():
    _, H, res = disordered(6, seed=8, M=-3.0)
    st = quench.build_fermi_sea(res, 3)
    sp = quench.jomega_double_occupancy(st)
    b = ed.build_basis(6, 3, 3)
    occ = res.eigenvectors[:, st.occupations]
    psi = ed.slater_state(occ, occ, b)
    D = ed.double_occupancy_operator(b)
    p = np.abs(psi) ** 2
    assert sp.weight.sum() == pytest.approx(p @ D ** 2 - (p @ D) ** 2, rel=1e-10)
    assert sp.reference_value == pytest.approx(p @ D, rel=1e-12)


def test_momentum_path_matches_generic_path():
    p = ModelParams(L=16, alpha=0.5, M_alpha=1.0, sigma=0.0, kac=True)
    a = quench.jomega_momentum_clean(p)
    b = quench.jomega_double_occupancy(quench.build_fermi_sea(quench.plane_wave_basis(p), 8))
    om, w = quench.merge_peaks(b.omega, b.weight, tol=1e-10)
    np.testing.assert_allclose(a.omega, om, atol=1e-10)
    np.testing.assert_allclose(a.weight, w, atol=1e-10)
    assert a.reference_value == pytest.approx(b.reference_value)


def test_momentum_path_requires_clean():
    with pytest.raises(ValueError):
        quench.jomega_momentum_clean(ModelParams(L=8, sigma=1.0))


def test_single_peak_arithmetic():
    sp = ExcitationSpectrum(np.array([2.0]), np.array([1.0]), 3.0, 0.0)
    r = quench.evolve_observable(sp, 1.0, [np.pi / 2])
    # d = d0 - 4 U w sin^2(omega t / 2) / omega
    assert r.values[0] == pytest.approx(3.0 - 4 * np.sin(np.pi / 2) ** 2 / 2)


def test_u_zero_is_flat():
    _, _, res = disordered(8)
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(res, 4))
    r = quench.evolve_observable(sp, 0.0, TIMES)
    assert np.all(r.values == sp.reference_value)


def test_exact_scaling_in_u():
    _, _, res = disordered(8)
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(res, 4))
    d1 = quench.evolve_observable(sp, 0.5, TIMES).values - sp.reference_value
    d2 = quench.evolve_observable(sp, 1.0, TIMES).values - sp.reference_value
    k1 = quench.evolve_observable(sp, 0.5, TIMES, "kinetic").values - sp.reference_energy
    k2 = quench.evolve_observable(sp, 1.0, TIMES, "kinetic").values - sp.reference_energy
    m = TIMES > 0
    np.testing.assert_allclose(d2[m] / d1[m], 2.0, rtol=1e-12)
    np.testing.assert_allclose(k2[m] / k1[m], 4.0, rtol=1e-12)


def test_plateau_is_long_time_mean():
    sp = ExcitationSpectrum(np.array([0.5, 1.3, 2.9]), np.array([0.2, 0.5, 0.3]), 10.0, 0.0)
    t = np.linspace(50, 100, 20001)
    r = quench.evolve_observable(sp, 0.7, t)
    assert np.mean(r.values) == pytest.approx(r.plateau, rel=0.01)


def test_ed_agreement_double_occupancy_second_order():
    _, T, pw = clean_l4()
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(pw, 2))
    errs = []
    for U in (0.1, 0.05, 0.025):
        d_ed = ed.quench_double_occupancy(T, pw.eigenvectors, pw.eigenvalues, U, TIMES)
        errs.append(np.max(np.abs(d_ed - quench.evolve_observable(sp, U, TIMES).values)))
        assert errs[-1] < 0.2 * np.max(np.abs(d_ed - d_ed[0]))
    # the leading-order double occupancy carries an O(U^2) error
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_ed_agreement_kinetic_energy_third_order():
    _, T, pw = clean_l4()
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(pw, 2))
    errs = []
    for U in (0.1, 0.05, 0.025):
        k_ed = ed.quench_kinetic_energy(T, pw.eigenvectors, pw.eigenvalues, U, TIMES)
        errs.append(np.max(np.abs(k_ed - quench.evolve_observable(sp, U, TIMES, "kinetic").values)))
    assert errs[0] / errs[1] >= 6 and errs[1] / errs[2] >= 6


def test_ed_agreement_disordered_l6():
    _, H, res = disordered(6, seed=4)
    sp = quench.jomega_double_occupancy(quench.build_fermi_sea(res, 3))
    errs = []
    for U in (0.1, 0.05):
        d_ed = ed.quench_double_occupancy(H, res.eigenvectors, res.eigenvalues, U, TIMES)
        errs.append(np.max(np.abs(d_ed - quench.evolve_observable(sp, U, TIMES).values)))
    assert errs[0] / errs[1] > 3.5


def test_realization_weights_reproduce_exact_totals():
    _, _, res = disordered(12, seed=1, M=-2.0)
    st = quench.build_fermi_sea(res, 6)
    raw = quench.enumerate_excitations(st)
    w = quench.realization_weights(res.eigenvectors, st.occupations)
    lv = raw.levels
    single = lv[:, 2] < 0
    c13 = ~single & (lv[:, 0] == lv[:, 2]) & (lv[:, 1] != lv[:, 3])
    c24 = ~single & (lv[:, 0] != lv[:, 2]) & (lv[:, 1] == lv[:, 3])
    both = ~single & (lv[:, 0] == lv[:, 2]) & (lv[:, 1] == lv[:, 3])
    dd = ~single & ~c13 & ~c24 & ~both
    for key, m in (("dd", dd), ("c13", c13), ("c24", c24), ("both", both), ("single", single)):
        assert np.mean(raw.amplitude2[m]) == pytest.approx(w[key], rel=1e-10)
    assert w["d0"] == pytest.approx(quench.double_occupancy_fs(st), rel=1e-12)


def test_averaged_tier_matches_exact_small_l():
    # validation of the averaged tier: <= 5% of the drop at L = 2^6, 8 realizations
    p = ModelParams(L=64, alpha=0.5, M_alpha=0.0, sigma=1.0, U=1.0, seed=11)
    t = np.linspace(0, 10, 256)
    ex = quench.ensemble_quench(p, 8, t, tier="exact", workers=4)
    av = quench.ensemble_quench(p, 8, t, tier="averaged", workers=4)
    drop = np.max(np.abs(ex.values - ex.values[0]))
    assert np.max(np.abs(ex.values - av.values)) <= 0.05 * drop
    assert av.plateau == pytest.approx(ex.plateau, abs=0.05 * drop)


def test_averaged_kinetic_consistent_with_energy_conservation():
    _, _, res = disordered(32, seed=2)
    avg = quench.averaged_spectrum(res.eigenvalues, eigenvectors=res.eigenvectors)
    d = quench.evolve_averaged(avg, 0.8, TIMES)
    k = quench.evolve_averaged(avg, 0.8, TIMES, "kinetic")
    np.testing.assert_allclose(k.values - avg.reference_energy, 0.8 * (avg.reference_value - d.values),
                               atol=1e-12)


def test_averaged_plateau_matches_time_average():
    _, _, res = disordered(64, seed=6, M=-4 * np.pi)
    avg = quench.averaged_spectrum(res.eigenvalues, eigenvectors=res.eigenvectors)
    t = np.linspace(0, 60, 3000)
    d = quench.evolve_averaged(avg, 1.0, t)
    late = d.values[t > 20].mean()
    drop = d.values[0] - late
    assert d.plateau == pytest.approx(late, abs=0.02 * drop)


def test_haar_fallback_without_vectors():
    _, _, res = disordered(32, seed=2)
    avg = quench.averaged_spectrum(res.eigenvalues)
    assert avg.moments == "haar"
    r = quench.evolve_averaged(avg, 1.0, TIMES)
    assert np.all(np.isfinite(r.values)) and r.values[0] == avg.reference_value


def test_ensemble_contract():
    p = ModelParams(L=8, U=1.0, seed=4)
    one = quench.ensemble_quench(p, 1, TIMES)
    single = quench.quench_realization(p, TIMES, 0)
    np.testing.assert_array_equal(one.values, single.values)
    clean = quench.ensemble_quench(p.with_(sigma=0.0, M_alpha=1.0, alpha=0.3), 3, TIMES)
    assert np.all(clean.stderr == 0)
    a = quench.ensemble_quench(p, 4, TIMES, workers=1)
    b = quench.ensemble_quench(p, 4, TIMES, workers=3)
    np.testing.assert_array_equal(a.values, b.values)
    with pytest.raises(ValueError):
        quench.ensemble_quench(p, 0, TIMES)


def test_exact_tier_refuses_large_l():
    res = SpectrumResult(np.arange(130.0), np.eye(130))
    with pytest.raises(ValueError):
        quench.enumerate_excitations(quench.build_fermi_sea(res, 65))


def test_result_csv_and_sidecar():
    p = ModelParams(L=8, U=0.5)
    r = quench.quench_realization(p, [0.0, 1.0], 0)
    lines = r.to_csv().split("\n")
    assert lines[0] == "t,d,stderr" and lines[1].startswith("0,")
    import json
    meta = json.loads(r.sidecar())
    assert meta["params"]["L"] == 8 and meta["seeds"]["realization_index"] == 0


def test_clean_alpha0_freezing_trend():
    devs = []
    Ls = (64, 256, 1024)
    for L in Ls:
        p = ModelParams(L=L, alpha=0.0, sigma=0.0, U=2.0, kac=True)
        r = quench.evolve_observable(quench.jomega_momentum_clean(p), 2.0, TIMES)
        devs.append(np.max(np.abs(r.values - r.values[0])) / r.values[0])
    assert devs[0] > devs[1] > devs[2]
