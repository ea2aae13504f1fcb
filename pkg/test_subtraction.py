import math

import numpy as np
import pytest
from scipy.linalg import expm

from detector_presets import get_preset, list_presets
from fock_core import (
    SqueezedVacuumSpec,
    annihilation_operator,
    fock_state,
    impure_squeezed_vacuum,
    loss_channel,
    loss_kraus,
    photon_distribution,
    squeezed_vacuum_coeffs,
    squeezed_vacuum_dm,
    vacuum,
    wigner_origin,
)
from kitten_errors import ImpossibleHerald, InsufficientCutoff, InvalidParameter
from subtraction import (
    SUBTRACTION_PROBABILITY,
    DetectorModel,
    ExperimentParams,
    bayes_weights,
    click_probability,
    conditional_state,
    conditional_unnormalized,
    detector_response,
    herald_probability,
    impnrd_state,
    imnpnrd_state,
    mode_mix,
    pnrd_state,
    prepare_kitten,
    prepare_kitten_detailed,
    subtraction_probabilities,
    subtraction_probability,
    tap_vacuum_state,
)


def tap_amplitudes(signal_vector, r2):
    """Signal amplitudes for each tap photon number from an explicit beam-splitter unitary"""
    dim = len(signal_vector)
    a = annihilation_operator(dim)
    eye = np.eye(dim)
    signal = np.kron(a, eye)
    tap = np.kron(eye, a)
    theta = math.acos(math.sqrt(1.0 - r2))
    unitary = expm(theta * (signal.T @ tap - signal @ tap.T))
    vac = np.zeros(dim)
    vac[0] = 1.0
    out = unitary @ np.kron(signal_vector, vac)
    # out[i, k]: i photons in the signal, k in the tap
    return out.reshape(dim, dim)


def two_mode_tap(xi, r2, nmax):
    return tap_amplitudes(squeezed_vacuum_coeffs(xi, nmax), r2)


@pytest.fixture
def typical_input():
    return impure_squeezed_vacuum(SqueezedVacuumSpec.from_db(-4.67), 0.1771)


class TestTwoModeOracle:
    @pytest.mark.parametrize("xi", [0.3, 0.538])
    @pytest.mark.parametrize("r2", [0.05, 0.08, 0.2])
    def test_pnrd_matches_beam_splitter(self, xi, r2):
        nmax = 12
        amplitudes = two_mode_tap(xi, r2, nmax)
        rho_in = squeezed_vacuum_dm(SqueezedVacuumSpec(xi, nmax))
        for k in range(4):
            v = amplitudes[:, k]
            assert subtraction_probability(rho_in, r2, k) == pytest.approx(v @ v, abs=1e-10)
        v = amplitudes[:, 1]
        expected = np.outer(v, v) / (v @ v)
        np.testing.assert_allclose(pnrd_state(rho_in, r2, 1).elements, expected, atol=1e-10)

    @pytest.mark.parametrize("m", [1, 2])
    def test_impure_input_matches_beam_splitter(self, m):
        nmax, xi, r1, r2 = 12, 0.538, 0.1771, 0.08
        coeffs = squeezed_vacuum_coeffs(xi, nmax)
        # the impurity beam splitter as a mixture over photons lost to its reflected port
        expected = np.zeros((nmax + 1, nmax + 1))
        for branch in loss_kraus(nmax + 1, 1.0 - r1):
            v = tap_amplitudes(branch @ coeffs, r2)[:, m]
            expected += np.outer(v, v)
        expected /= np.trace(expected)
        rho_in = impure_squeezed_vacuum(SqueezedVacuumSpec(xi, nmax), r1)
        np.testing.assert_allclose(pnrd_state(rho_in, r2, m).elements, expected, atol=1e-10)


class TestSubtractionProbabilities:
    def test_sum_to_one(self, typical_input):
        assert np.sum(subtraction_probabilities(typical_input, 0.08)) == pytest.approx(1.0, abs=1e-6)

    def test_vector_matches_branch_traces(self, typical_input):
        probs = subtraction_probabilities(typical_input, 0.08)
        for k in range(5):
            _, weight = conditional_unnormalized(typical_input, 0.08, k)
            assert probs[k] == pytest.approx(weight, abs=1e-14)

    def test_beyond_cutoff_is_zero(self):
        rho = fock_state(2, 4)
        state, weight = conditional_unnormalized(rho, 0.5, 7)
        assert weight == 0.0
        assert state.trace() == 0.0
        assert subtraction_probability(rho, 0.5, 7) == 0.0

    def test_two_photon_events_are_rare(self, typical_input):
        probs = subtraction_probabilities(typical_input, 0.08)
        assert probs[2] / probs[1] < 0.1

    def test_single_photon_split(self):
        probs = subtraction_probabilities(fock_state(1, 3), 0.3)
        np.testing.assert_allclose(probs, [0.7, 0.3, 0.0, 0.0], atol=1e-14)

    def test_rejects_bad_reflectivity(self, typical_input):
        with pytest.raises(InvalidParameter):
            subtraction_probabilities(typical_input, 0.0)
        with pytest.raises(InvalidParameter):
            subtraction_probability(typical_input, 0.08, -1)


class TestPNRD:
    def test_parity_oracle(self):
        spec = SqueezedVacuumSpec.from_db(-4.67)
        params = ExperimentParams(spec, r1=0.0, r2=0.08, mode_purity=1.0, eta_hd=1.0)
        rho = prepare_kitten(params, DetectorModel.for_model("pnrd"))
        assert wigner_origin(rho) == pytest.approx(-1 / math.pi, abs=1e-6)
        np.testing.assert_allclose(photon_distribution(rho)[0::2], 0.0, atol=1e-15)

    def test_two_photon_subtraction_keeps_even_parity(self):
        rho = pnrd_state(squeezed_vacuum_dm(SqueezedVacuumSpec.from_db(-4.67)), 0.08, 2)
        assert np.all(photon_distribution(rho)[1::2] == 0.0)
        assert wigner_origin(rho) > 0

    def test_impossible_herald(self):
        with pytest.raises(ImpossibleHerald):
            pnrd_state(vacuum(10), 0.08, 1)

    def test_tap_vacuum_branch_is_normalised(self, typical_input):
        state = tap_vacuum_state(typical_input, 0.08)
        assert state.trace() == pytest.approx(1.0)
        assert wigner_origin(state) > 0


class TestDetectorResponse:
    def test_ideal_detector_is_exact(self):
        det = DetectorModel(ideal=True)
        for k in range(4):
            for m in range(4):
                assert detector_response(k, m, det) == (1.0 if k == m else 0.0)

    def test_dark_counts_only(self):
        det = DetectorModel(pdc=0.01, eta=0.5)
        assert detector_response(0, 0, det) == pytest.approx(math.exp(-0.01))
        assert detector_response(0, 1, det) == pytest.approx(0.01 * math.exp(-0.01))

    def test_efficiency_only(self):
        det = DetectorModel(pdc=0.0, eta=0.3)
        assert detector_response(2, 1, det) == pytest.approx(2 * 0.3 * 0.7)
        assert detector_response(1, 2, det) == 0.0

    @pytest.mark.parametrize("preset", list_presets(), ids=lambda p: p.name)
    def test_response_normalised(self, preset):
        det = preset.detector("impnrd")
        for k in range(6):
            total = sum(detector_response(k, m, det) for m in range(k + 15))
            assert total == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("preset", list_presets(), ids=lambda p: p.name)
    def test_bayes_weights_normalised(self, typical_input, preset):
        weights = bayes_weights(typical_input, 0.08, preset.detector("impnrd"))
        assert np.sum(weights) == pytest.approx(1.0, abs=1e-8)
        assert np.all(weights >= 0)


class TestDetectorModel:
    def test_ideal_forces_perfect_values(self):
        det = DetectorModel(pdc=0.1, eta=0.2, ideal=True)
        assert det.pdc == 0.0 and det.eta == 1.0

    @pytest.mark.parametrize("name,label,resolving,ideal", [
        ("pnrd", "PNRD", True, True),
        ("npnrd", "NPNRD", False, True),
        ("impnrd", "IMPNRD", True, False),
        ("IMNPNRD", "IMNPNRD", False, False),
    ])
    def test_for_model(self, name, label, resolving, ideal):
        det = DetectorModel.for_model(name, pdc=1e-4, eta=0.1)
        assert det.label == label
        assert det.resolving is resolving
        assert det.ideal is ideal

    def test_rejects_unknown_model(self):
        with pytest.raises(InvalidParameter):
            DetectorModel.for_model("spad")

    def test_rejects_bad_values(self):
        with pytest.raises(InvalidParameter):
            DetectorModel(eta=1.5)
        with pytest.raises(InvalidParameter):
            DetectorModel(m=0)


class TestImperfectDetectors:
    def test_perfect_impnrd_equals_pnrd(self, typical_input):
        det = DetectorModel(pdc=0.0, eta=1.0)
        np.testing.assert_allclose(impnrd_state(typical_input, 0.08, det).elements,
                                   pnrd_state(typical_input, 0.08, 1).elements, atol=1e-12)

    def test_on_off_weightings_agree_for_perfect_detector(self, typical_input):
        det = DetectorModel(pdc=0.0, eta=1.0, resolving=False)
        by_click = imnpnrd_state(typical_input, 0.08, det)
        by_subtraction = imnpnrd_state(typical_input, 0.08, det, weighting=SUBTRACTION_PROBABILITY)
        np.testing.assert_allclose(by_click.elements, by_subtraction.elements, atol=1e-12)

    def test_on_off_with_dark_counts_on_vacuum(self):
        det = DetectorModel(pdc=1e-3, eta=0.5, resolving=False)
        state = imnpnrd_state(vacuum(6), 0.08, det)
        assert state.elements[0, 0] == pytest.approx(1.0)
        assert click_probability(vacuum(6), 0.08, det) == pytest.approx(1 - math.exp(-1e-3))

    def test_resolving_without_dark_counts_on_vacuum(self):
        with pytest.raises(ImpossibleHerald):
            impnrd_state(vacuum(6), 0.08, DetectorModel(pdc=0.0, eta=0.5))

    def test_half_efficient_resolving_matches_ideal_on_off(self, lossless_params):
        params = lossless_params.replace(r1=0.0)
        inefficient = prepare_kitten(params, DetectorModel.for_model("impnrd", pdc=0.0, eta=0.5))
        on_off = prepare_kitten(params, DetectorModel.for_model("npnrd"))
        difference = np.abs(photon_distribution(inefficient) - photon_distribution(on_off))
        assert np.max(difference) < 5e-3

    def test_unknown_weighting(self, typical_input, dark_count_detector):
        with pytest.raises(InvalidParameter):
            imnpnrd_state(typical_input, 0.08, dark_count_detector, weighting="mystery")

    def test_herald_probability_of_ideal_detector(self, typical_input):
        det = DetectorModel.for_model("pnrd")
        assert herald_probability(typical_input, 0.08, det) == pytest.approx(
            subtraction_probability(typical_input, 0.08, 1))

    def test_dispatch(self, typical_input, dark_count_detector):
        np.testing.assert_allclose(
            conditional_state(typical_input, 0.08, dark_count_detector).elements,
            imnpnrd_state(typical_input, 0.08, dark_count_detector).elements)


class TestModeMix:
    def test_endpoints_and_midpoint(self):
        a, b = fock_state(1, 3), vacuum(3)
        assert mode_mix(a, b, 1.0) is a
        assert mode_mix(a, b, 0.0) is b
        np.testing.assert_allclose(photon_distribution(mode_mix(a, b, 0.25)), [0.75, 0.25, 0, 0])

    def test_rejects_mismatched_cutoffs(self):
        with pytest.raises(InvalidParameter):
            mode_mix(vacuum(3), vacuum(4), 0.5)


class TestPrepareKitten:
    def test_dark_count_kitten_is_negative(self, lossless_params, dark_count_detector):
        prepared = prepare_kitten_detailed(lossless_params, dark_count_detector)
        assert wigner_origin(prepared.state) < 0
        assert prepared.state.trace() == pytest.approx(1.0, abs=1e-9)
        assert prepared.state.is_physical()
        assert 0 < prepared.herald_probability < 0.01

    def test_higher_efficiency_gives_deeper_negativity(self, typical_params):
        si = DetectorModel.for_model("imnpnrd", pdc=1e-4, eta=0.45)
        ingaas = DetectorModel.for_model("imnpnrd", pdc=1e-4, eta=0.10)
        assert (wigner_origin(prepare_kitten(typical_params, si))
                < wigner_origin(prepare_kitten(typical_params, ingaas)))

    def test_dark_counts_raise_wigner_origin(self, typical_params):
        values = [wigner_origin(prepare_kitten(
            typical_params, DetectorModel.for_model("imnpnrd", pdc=pdc, eta=0.1)))
            for pdc in (1e-6, 1e-4, 1e-2)]
        assert values[0] < values[1] < values[2]

    @pytest.mark.parametrize("preset", ["si-aqr-12", "id200"])
    def test_wigner_origin_rises_with_dark_counts(self, typical_params, preset):
        eta = get_preset(preset).eta
        values = [wigner_origin(prepare_kitten(
            typical_params, DetectorModel.for_model("imnpnrd", pdc=pdc, eta=eta)))
            for pdc in np.logspace(-6, -2, 5)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_homodyne_loss_is_applied_last(self, lossless_params, dark_count_detector):
        lossy = lossless_params.replace(eta_hd=0.7)
        expected = loss_channel(prepare_kitten(lossless_params, dark_count_detector), 0.7)
        np.testing.assert_allclose(prepare_kitten(lossy, dark_count_detector).elements,
                                   expected.elements, atol=1e-12)

    def test_insufficient_cutoff(self):
        params = ExperimentParams(SqueezedVacuumSpec(2.0, 6))
        with pytest.raises(InsufficientCutoff):
            prepare_kitten(params, DetectorModel.for_model("pnrd"))

    def test_params_validation(self):
        spec = SqueezedVacuumSpec(0.3)
        with pytest.raises(InvalidParameter):
            ExperimentParams(spec, r2=0.0)
        with pytest.raises(InvalidParameter):
            ExperimentParams(spec, eta_hd=0.0)
        assert ExperimentParams(spec, r2=0.08).t2 == pytest.approx(0.92)

    def test_replace_with_squeezing_level(self, typical_params):
        changed = typical_params.replace(v0_db=-3.0, r2=0.1)
        assert changed.v0_db == pytest.approx(-3.0)
        assert changed.r2 == 0.1
        assert changed.spec.nmax == typical_params.spec.nmax
