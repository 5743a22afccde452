import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

from catbreed import (AcceptanceWindow, ConfigError, ConvergenceError,
                      DomainError, FockCutoff, HomodyneDataset, beam_splitter,
                      bootstrap, bootstrap_many, breed, concat_datasets,
                      fidelity, fock_state, load_dataset_csv, loss_channel,
                      marginal_pdf, maxlik_reconstruct, pad_density_operator,
                      partial_trace, quadrature_wavefunction, read_density_csv,
                      read_meta, sample_homodyne, sample_homodyne_phases,
                      save_dataset_csv, single_photon_state, squeeze_matrix,
                      uniform_phases, write_density_csv, write_meta)
from catbreed.fock import StateVector
from catbreed.tomography import _bin_edges, _binned_povm
import catbreed.tomography as tomo
from conftest import random_density


def bred_test_state(cutoff=FockCutoff(8)):
    photon = single_photon_state(0.87, 0.0, cutoff)
    return breed(photon, photon, AcceptanceWindow(0.3)).state


# ---------------------------------------------------------------------------
# datasets and phase folding

def test_dataset_folds_phases_into_half_turn():
    ds = HomodyneDataset(np.array([np.pi + 0.4, np.pi, 2 * np.pi + 0.1, -0.2]),
                         np.array([1.2, 0.7, 0.5, 0.9]))
    np.testing.assert_allclose(ds.thetas,
                               [0.4, 0.0, 0.1, np.pi - 0.2], atol=1e-12)
    np.testing.assert_allclose(ds.xs, [-1.2, -0.7, 0.5, -0.9], atol=1e-12)


def test_dataset_rejects_malformed_input():
    with pytest.raises(DomainError):
        HomodyneDataset(np.zeros(3), np.zeros(4))
    with pytest.raises(DomainError):
        HomodyneDataset(np.zeros(3), np.array([0.0, np.nan, 1.0]))


def test_dataset_unique_phases_and_concat():
    a = HomodyneDataset(np.full(5, 0.25), np.arange(5.0), {"tag": "a"})
    b = HomodyneDataset(np.full(3, 0.75), np.arange(3.0))
    joined = concat_datasets([a, b])
    assert len(joined) == 8
    np.testing.assert_allclose(joined.unique_phases(), [0.25, 0.75])
    assert joined.metadata["tag"] == "a"


# ---------------------------------------------------------------------------
# quadrature marginals

def test_marginal_pdf_vacuum_is_unit_variance_gaussian():
    vac = fock_state(0, FockCutoff(10)).to_density()
    pdf = marginal_pdf(vac, 0.0)
    xs = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(pdf(xs), np.exp(-xs ** 2) / np.sqrt(np.pi),
                               atol=1e-12)
    # a number state has no phase reference
    np.testing.assert_allclose(marginal_pdf(vac, 0.7)(xs), pdf(xs), atol=1e-12)


def test_marginal_pdf_single_photon_law():
    one = fock_state(1, FockCutoff(10)).to_density()
    xs = np.linspace(-3, 3, 13)
    expected = 2.0 * xs ** 2 * np.exp(-xs ** 2) / np.sqrt(np.pi)
    np.testing.assert_allclose(marginal_pdf(one, 0.0)(xs), expected, atol=1e-12)


def test_marginal_window_mass_matches_conditioning_probability():
    cut = FockCutoff(20)
    one = fock_state(1, cut).to_density()
    joint = beam_splitter(one, one, 0.5)
    reduced = partial_trace(joint, "b")
    mass, _ = quad(marginal_pdf(reduced, 0.0), -0.3, 0.3)
    psi2_mass, _ = quad(lambda x: quadrature_wavefunction(2, x) ** 2, -0.3, 0.3)
    assert mass == pytest.approx(0.5 * (erf(0.3) + psi2_mass), abs=1e-9)


def test_marginal_pdf_of_bred_state_is_physical():
    rho = bred_test_state()
    pdf = marginal_pdf(rho, 0.0)
    xs = np.linspace(-6, 6, 241)
    vals = pdf(xs)
    np.testing.assert_allclose(vals, vals[::-1], atol=1e-10)
    assert vals.min() > -1e-10
    total, _ = quad(pdf, -12, 12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


# ---------------------------------------------------------------------------
# synthetic sampling

def test_sample_homodyne_vacuum_moments():
    vac = fock_state(0, FockCutoff(6)).to_density()
    rng = np.random.default_rng(40)
    ds = sample_homodyne(vac, 0.0, 100000, rng)
    assert np.mean(ds.xs) == pytest.approx(0.0, abs=0.01)
    assert np.var(ds.xs) == pytest.approx(0.5, abs=0.01)


def test_sample_homodyne_squeezed_variance():
    cut = FockCutoff(30)
    amps = squeeze_matrix(3.64, cut) @ fock_state(0, cut).amplitudes
    rho = StateVector(amps, cut).to_density()
    rng = np.random.default_rng(41)
    ds = sample_homodyne(rho, 0.0, 100000, rng)
    assert np.var(ds.xs) == pytest.approx(0.5 * 10 ** (-0.364), abs=0.01)


def test_sample_homodyne_single_photon_node():
    one = fock_state(1, FockCutoff(6)).to_density()
    rng = np.random.default_rng(42)
    ds = sample_homodyne(one, 0.0, 100000, rng)
    assert np.mean(np.abs(ds.xs) < 0.05) < 0.001


def test_sample_homodyne_is_deterministic_per_seed():
    rho = bred_test_state()
    a = sample_homodyne(rho, 0.3, 500, np.random.default_rng(5))
    b = sample_homodyne(rho, 0.3, 500, np.random.default_rng(5))
    c = sample_homodyne(rho, 0.3, 500, np.random.default_rng(6))
    np.testing.assert_array_equal(a.xs, b.xs)
    assert not np.array_equal(a.xs, c.xs)


def test_sample_homodyne_rejects_empty_request():
    vac = fock_state(0, FockCutoff(6)).to_density()
    with pytest.raises(DomainError):
        sample_homodyne(vac, 0.0, 0, np.random.default_rng(0))


def test_phase_noise_broadens_a_squeezed_quadrature():
    cut = FockCutoff(30)
    amps = squeeze_matrix(6.0, cut) @ fock_state(0, cut).amplitudes
    rho = StateVector(amps, cut).to_density()
    clean = sample_homodyne(rho, 0.0, 20000, np.random.default_rng(43))
    noisy = sample_homodyne(rho, 0.0, 20000, np.random.default_rng(43),
                            phase_noise_sigma=0.5)
    assert np.var(noisy.xs) > 2.0 * np.var(clean.xs)


def test_uniform_phases_cover_half_turn():
    phases = uniform_phases(12)
    np.testing.assert_allclose(phases, np.arange(12) * np.pi / 12)
    with pytest.raises(DomainError):
        uniform_phases(0)


def test_sample_homodyne_phases_splits_counts():
    vac = fock_state(0, FockCutoff(6)).to_density()
    ds = sample_homodyne_phases(vac, uniform_phases(4), 10,
                                np.random.default_rng(44))
    assert len(ds) == 10
    counts = [np.sum(np.isclose(ds.thetas, th)) for th in uniform_phases(4)]
    assert counts == [3, 3, 2, 2]
    assert ds.metadata["total_count"] == 10
    with pytest.raises(DomainError):
        sample_homodyne_phases(vac, uniform_phases(4), 3,
                               np.random.default_rng(0))


# ---------------------------------------------------------------------------
# maximum-likelihood reconstruction

def test_maxlik_recovers_vacuum():
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne_phases(vac, uniform_phases(4), 6000,
                                  np.random.default_rng(50))
    result = maxlik_reconstruct(data, FockCutoff(4))
    assert result.rho_hat.populations()[0] > 0.99
    assert result.stop_reason == "converged"
    assert result.final_likelihood_gain < 1e-10


def test_maxlik_likelihood_never_decreases():
    rho = bred_test_state()
    data = sample_homodyne_phases(rho, uniform_phases(8), 5000,
                                  np.random.default_rng(51))
    result = maxlik_reconstruct(data, FockCutoff(8))
    diffs = np.diff(result.likelihood_history)
    assert diffs.min() >= -1e-12


def test_maxlik_rejects_underdetermined_data():
    vac = fock_state(0, FockCutoff(12)).to_density()
    data = sample_homodyne(vac, 0.0, 10, np.random.default_rng(52))
    with pytest.raises(ConvergenceError):
        maxlik_reconstruct(data, FockCutoff(12))


def test_maxlik_rejects_unknown_efficiency_model():
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne(vac, 0.0, 100, np.random.default_rng(53))
    with pytest.raises(DomainError):
        maxlik_reconstruct(data, FockCutoff(4), efficiency_model="psychic")


def test_maxlik_detection_correction_round_trip():
    # degrade the state exactly as the lossy detector would, then ask the
    # corrected reconstruction for the state before the detector
    truth = bred_test_state(FockCutoff(8))
    seen = loss_channel(truth, 0.76)
    data = sample_homodyne_phases(seen, uniform_phases(8), 20000,
                                  np.random.default_rng(54))
    result = maxlik_reconstruct(data, FockCutoff(8),
                                efficiency_model="detection")
    assert fidelity(result.rho_hat, truth) > 0.97


def test_maxlik_composed_correction_round_trip():
    truth = bred_test_state(FockCutoff(8))
    seen = loss_channel(truth, 0.76 * 0.841)
    data = sample_homodyne_phases(seen, uniform_phases(8), 30000,
                                  np.random.default_rng(55))
    result = maxlik_reconstruct(data, FockCutoff(8),
                                efficiency_model="detection+storage")
    assert fidelity(result.rho_hat, truth) > 0.95


def test_maxlik_estimate_is_phase_covariant():
    # shifting every recorded phase by delta must rotate the estimate by
    # the number operator, exactly
    rho = bred_test_state(FockCutoff(8))
    data = sample_homodyne_phases(rho, uniform_phases(8), 20000,
                                  np.random.default_rng(56))
    delta = 0.37
    shifted = HomodyneDataset(data.thetas + delta, data.xs)
    base = maxlik_reconstruct(data, FockCutoff(8)).rho_hat
    moved = maxlik_reconstruct(shifted, FockCutoff(8)).rho_hat
    n = np.arange(9)
    R = np.diag(np.exp(-1j * delta * n))
    conjugated = R @ base.matrix @ R.conj().T
    np.testing.assert_allclose(moved.matrix, conjugated, atol=1e-8)


def test_binned_povm_resolves_identity():
    n_bins = len(_bin_edges()) - 1
    for eta in (1.0, 0.76):
        povm = _binned_povm(13, (0.0, 0.5, 1.1), eta)
        for k in range(3):
            total = povm[k * n_bins:(k + 1) * n_bins].sum(axis=0)
            np.testing.assert_allclose(total, np.eye(13), atol=1e-8)


def test_maxlik_error_shrinks_with_sample_size():
    truth = bred_test_state(FockCutoff(12))
    errs = {}
    for n in (1000, 10000, 100000):
        vals = []
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            data = sample_homodyne_phases(truth, uniform_phases(8), n, rng)
            result = maxlik_reconstruct(data, FockCutoff(8))
            padded = pad_density_operator(result.rho_hat, FockCutoff(12))
            vals.append(1.0 - fidelity(padded, truth))
        errs[n] = float(np.mean(vals))
    assert errs[1000] > errs[10000] > errs[100000]
    assert errs[100000] < 0.01


# ---------------------------------------------------------------------------
# bootstrap

def test_bootstrap_of_invariant_statistic_has_zero_spread():
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne_phases(vac, uniform_phases(4), 1000,
                                  np.random.default_rng(60))
    result = bootstrap(data, 50, lambda r: float(np.real(np.trace(r.rho_hat.matrix))),
                       np.random.default_rng(61), cutoff=FockCutoff(4))
    assert result.mean == pytest.approx(1.0, abs=1e-12)
    assert result.std < 1e-12
    assert result.n_failed == 0


def test_bootstrap_is_deterministic_under_master_seed():
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne_phases(vac, uniform_phases(4), 800,
                                  np.random.default_rng(62))
    stat = {"p0": lambda r: float(r.rho_hat.populations()[0])}
    a = bootstrap_many(data, 50, stat, np.random.default_rng(7),
                       cutoff=FockCutoff(4))
    b = bootstrap_many(data, 50, stat, np.random.default_rng(7),
                       cutoff=FockCutoff(4))
    assert a["p0"].values == b["p0"].values


def test_bootstrap_many_shares_resamples_across_statistics():
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne_phases(vac, uniform_phases(4), 800,
                                  np.random.default_rng(63))
    stats = {
        "p0": lambda r: float(r.rho_hat.populations()[0]),
        "one_minus_p0": lambda r: 1.0 - float(r.rho_hat.populations()[0]),
    }
    results = bootstrap_many(data, 50, stats, np.random.default_rng(8),
                             cutoff=FockCutoff(4))
    paired = np.array(results["p0"].values) + np.array(
        results["one_minus_p0"].values)
    np.testing.assert_allclose(paired, 1.0, atol=1e-12)


def test_bootstrap_interval_covers_known_population():
    covered = 0
    truth = single_photon_state(0.87, 0.0, FockCutoff(4))
    for exp in range(10):
        rng = np.random.default_rng(200 + exp)
        data = sample_homodyne_phases(truth, uniform_phases(4), 1500, rng)
        result = bootstrap(data, 50,
                           lambda r: float(r.rho_hat.populations()[1]),
                           np.random.default_rng(300 + exp),
                           cutoff=FockCutoff(4))
        covered += result.ci_low <= 0.87 <= result.ci_high
    assert covered >= 8


def test_bootstrap_interval_narrows_with_sample_size():
    vac = fock_state(0, FockCutoff(4)).to_density()
    widths = []
    for n in (4000, 8000):
        data = sample_homodyne_phases(vac, uniform_phases(4), n,
                                      np.random.default_rng(42))
        result = bootstrap(data, 100,
                           lambda r: float(r.rho_hat.populations()[0]),
                           np.random.default_rng(43), cutoff=FockCutoff(4))
        widths.append(result.ci_high - result.ci_low)
    ratio = widths[1] / widths[0]
    assert 0.55 < ratio < 0.85


def test_bootstrap_rejects_tiny_resample_counts():
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne_phases(vac, uniform_phases(4), 500,
                                  np.random.default_rng(64))
    with pytest.raises(DomainError):
        bootstrap(data, 10, lambda r: 1.0, np.random.default_rng(0),
                  cutoff=FockCutoff(4))
    with pytest.raises(DomainError):
        bootstrap_many(data, 50, {}, np.random.default_rng(0),
                       cutoff=FockCutoff(4))


def test_bootstrap_tolerates_rare_failures(monkeypatch):
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne_phases(vac, uniform_phases(4), 500,
                                  np.random.default_rng(65))
    real = tomo.maxlik_reconstruct
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] % 20 == 0:
            raise ConvergenceError("injected failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(tomo, "maxlik_reconstruct", flaky)
    result = bootstrap(data, 60, lambda r: float(r.rho_hat.populations()[0]),
                       np.random.default_rng(9), cutoff=FockCutoff(4))
    assert result.n_failed == 3
    assert len(result.values) == 57


def test_bootstrap_raises_when_failures_dominate(monkeypatch):
    vac = fock_state(0, FockCutoff(4)).to_density()
    data = sample_homodyne_phases(vac, uniform_phases(4), 500,
                                  np.random.default_rng(66))
    real = tomo.maxlik_reconstruct
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] % 5 == 0:
            raise ConvergenceError("injected failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(tomo, "maxlik_reconstruct", flaky)
    with pytest.raises(ConvergenceError):
        bootstrap(data, 60, lambda r: float(r.rho_hat.populations()[0]),
                  np.random.default_rng(10), cutoff=FockCutoff(4))


# ---------------------------------------------------------------------------
# file formats

def test_dataset_csv_round_trip(tmp_path):
    vac = fock_state(0, FockCutoff(4)).to_density()
    ds = sample_homodyne_phases(vac, uniform_phases(3), 50,
                                np.random.default_rng(70))
    path = tmp_path / "data.csv"
    save_dataset_csv(ds, path)
    back = load_dataset_csv(path)
    np.testing.assert_allclose(back.thetas, ds.thetas, atol=1e-10)
    np.testing.assert_allclose(back.xs, ds.xs, atol=1e-10)
    assert back.metadata["source"] == str(path)


def test_dataset_csv_rejects_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_dataset_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("x,theta\n0.0,0.1\n")
    with pytest.raises(ConfigError):
        load_dataset_csv(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("theta,x\n")
    with pytest.raises(ConfigError):
        load_dataset_csv(empty)


def test_density_csv_round_trip(tmp_path):
    rng = np.random.default_rng(71)
    rho = random_density(rng, 6)
    path = tmp_path / "rho.csv"
    write_density_csv(rho, path)
    back = read_density_csv(path)
    assert back.cutoff == rho.cutoff
    np.testing.assert_allclose(back.matrix, rho.matrix, atol=1e-9)


def test_density_csv_rejects_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        read_density_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("re_0,im_0,re_1\n1,0,0\n")
    with pytest.raises(ConfigError):
        read_density_csv(bad)
    short = tmp_path / "short.csv"
    short.write_text("re_0,im_0,re_1,im_1\n1,0,0,0\n")
    with pytest.raises(ConfigError):
        read_density_csv(short)


def test_meta_round_trip(tmp_path):
    path = tmp_path / "state.meta"
    write_meta(path, {"herald_probability": 0.2245, "stage": "creation"})
    back = read_meta(path)
    assert back["stage"] == "creation"
    assert float(back["herald_probability"]) == pytest.approx(0.2245)
