import numpy as np
import pytest

from postselect.decoders import (
    DECODER_COLUMNS,
    aqec_check,
    decoherence_decoders,
    decoherence_state,
    fpaa_decode,
    injective_part,
    petz_teleport_decode,
    pseudoinverse_circuit_decode,
    pseudoinverse_decode,
    pseudoinverse_report,
    random_teleport_instance,
    teleported_state,
    truncated_inverse_infidelity_bound,
    yk_block_encoding,
    yk_teleport_decode,
)
from postselect.errors import DomainError, NonInjectiveError
from postselect.linalg_core import haar_random_unitary
from postselect.protocols import BranchSpectrum
from postselect.svtfun import SVTFunction


@pytest.fixture(scope='module')
def teleport():
    return random_teleport_instance(4, 1, 2, seed=31)


class TestPseudoinverse:
    def test_two_level_spectrum(self):
        report = pseudoinverse_report(BranchSpectrum.from_values([0.1, 0.4]), SVTFunction('trunc_inverse', 0.1))
        assert np.isclose(report.p_succ, 0.4)
        assert np.isclose(report.f_decoding, 1.0)
        assert np.isclose(report.f_uhlmann, 0.9)
        assert report.effective_rank == 2

    def test_flat_spectrum(self):
        report = pseudoinverse_report(BranchSpectrum.from_values([0.3, 0.3]), SVTFunction('trunc_inverse', 0.3))
        assert np.isclose(report.p_succ, 1.0)
        assert np.isclose(report.f_decoding, 1.0)

    def test_rank_deficient_spectrum(self, caplog):
        report = pseudoinverse_report(BranchSpectrum.from_values([0.0, 0.4]), SVTFunction('trunc_inverse', 0.4))
        assert report.effective_rank == 1
        assert np.isclose(report.f_decoding, 1.0)
        assert 'injective sub-block' in caplog.text

    def test_instance_decode(self, teleport):
        spectrum = teleport.spectrum
        report = pseudoinverse_decode(teleport, spectrum.p_min)
        assert np.isclose(report.f_decoding, 1.0)
        assert np.isclose(report.p_succ, spectrum.p_min / spectrum.p_m)
        assert list(report.as_row()) == DECODER_COLUMNS


class TestTruncatedInverseBound:
    def test_two_level_spectrum(self):
        spectrum = BranchSpectrum.from_values([0.1, 0.4])
        report = pseudoinverse_report(spectrum, SVTFunction('trunc_inverse', 0.2))
        assert np.isclose(report.f_decoding, 0.9)
        assert truncated_inverse_infidelity_bound(spectrum, 0.2) == pytest.approx(0.25)

    def test_vanishes_at_or_below_p_min(self):
        spectrum = BranchSpectrum.from_values([0.2, 0.3, 0.5])
        assert truncated_inverse_infidelity_bound(spectrum, 0.2) == 0.0
        assert truncated_inverse_infidelity_bound(spectrum, 0.1) == 0.0

    def test_bounds_the_infidelity(self, rng):
        for _ in range(50):
            spectrum = BranchSpectrum.from_values(rng.uniform(0.01, 1.0, size=int(rng.integers(2, 40))))
            for q in (5, 10, 25, 50):
                p_star = float(np.percentile(spectrum.p_am, q))
                report = pseudoinverse_report(spectrum, SVTFunction('trunc_inverse', p_star))
                assert 1 - report.f_decoding <= truncated_inverse_infidelity_bound(spectrum, p_star) + 1e-12

    def test_rejects_non_positive_threshold(self):
        with pytest.raises(DomainError):
            truncated_inverse_infidelity_bound(BranchSpectrum.from_values([0.2, 0.3]), 0.0)


class TestInjectivePart:
    def test_drops_empty_branches(self):
        part = injective_part(BranchSpectrum.from_values([0.0, 0.4, 0.2]))
        assert part.d_r == 2
        assert np.isclose(part.p_m, 0.3)

    def test_nothing_to_invert(self):
        with pytest.raises(NonInjectiveError):
            injective_part(BranchSpectrum.from_values([0.0, 0.0]))


class TestTeleportDecoders:
    def test_yk_and_petz_share_fidelity(self, teleport):
        yk = yk_teleport_decode(teleport)
        petz = petz_teleport_decode(teleport)
        assert np.isclose(yk.f_decoding, petz.f_decoding)
        assert yk.f_decoding <= yk.f_uhlmann + 1e-9

    def test_yk_and_petz_agree_on_random_instances(self):
        for seed in range(50):
            instance = random_teleport_instance(4, 1, 2, seed=seed)
            yk = yk_teleport_decode(instance)
            petz = petz_teleport_decode(instance)
            assert yk.f_decoding == pytest.approx(petz.f_decoding, abs=1e-9)

    def test_teleported_state_normalized(self, teleport):
        omega = teleported_state(teleport)
        assert omega.shape == (teleport.d_r, teleport.d_d)
        assert np.isclose(np.sum(np.abs(omega) ** 2), 1.0)


class TestDecoherenceDecoders:
    @pytest.mark.parametrize('output_partition', [(8, 2), (2, 8)])
    def test_success_ratio(self, rng, output_partition):
        omega = decoherence_state(haar_random_unitary(16, rng), (2, 8), output_partition)
        yk, petz = decoherence_decoders(omega)
        d_e, d_d = output_partition
        assert np.isclose(yk.f_decoding, petz.f_decoding)
        assert np.isclose(yk.p_succ / petz.p_succ, d_e / (2 * d_d))
        assert (yk.p_succ > petz.p_succ) == (d_e > 2 * d_d)

    def test_success_ordering_on_random_instances(self, rng):
        for index in range(50):
            d_e, d_d = (8, 2) if index % 2 else (2, 8)
            omega = decoherence_state(haar_random_unitary(16, rng), (2, 8), (d_e, d_d))
            yk, petz = decoherence_decoders(omega)
            assert np.isclose(yk.f_decoding, petz.f_decoding)
            assert (yk.p_succ > petz.p_succ) == (d_e > 2 * d_d)

    def test_decoupling_fidelity_bounds_decoding(self, rng):
        omega = decoherence_state(haar_random_unitary(16, rng), (2, 8), (4, 4))
        yk, _ = decoherence_decoders(omega)
        assert 0 < yk.f_uhlmann <= 1
        assert yk.f_decoding <= yk.f_uhlmann + 1e-6


class TestAqec:
    def test_success_bound(self):
        result = aqec_check(BranchSpectrum.from_values([0.24, 0.26]), 0.5, 0.05)
        assert result.satisfied
        assert np.isclose(result.measured_epsilon_prime, 0.02)
        assert np.isclose(result.alpha, 0.9)
        assert np.isclose(result.p_qsvt_bound, 0.45)
        assert np.isclose(result.p_qsvt_measured, 0.9)
        assert result.p_qsvt_measured >= result.p_qsvt_bound

    def test_condition_violated(self):
        assert not aqec_check(BranchSpectrum.from_values([0.1, 0.4]), 0.5, 0.05).satisfied

    def test_invalid_epsilons(self):
        with pytest.raises(DomainError):
            aqec_check(BranchSpectrum.from_values([0.24, 0.26]), 0.05, 0.5)


class TestCircuitDecoders:
    @pytest.fixture(scope='class')
    def small(self):
        return random_teleport_instance(3, 1, 1, seed=41)

    def test_yk_encoding_is_certified(self, small):
        encoding = yk_block_encoding(small)
        assert encoding.block().shape == (small.d_r, small.d_d)

    def test_pseudoinverse_circuit_matches_spectrum(self, small):
        p_star = 0.5 * small.spectrum.p_min
        report, phases = pseudoinverse_circuit_decode(small, p_star, delta_mult=1e-2)
        expected = pseudoinverse_report(small.spectrum, phases.realized_polynomial, p_star)
        assert report.p_succ == pytest.approx(expected.p_succ, abs=1e-8)
        assert report.f_decoding == pytest.approx(expected.f_decoding, abs=1e-8)
        assert report.f_decoding >= 1 - 1e-3

    def test_fpaa_circuit_matches_spectrum(self, small):
        p_star = 0.5 * small.spectrum.p_min
        spectral = fpaa_decode(small, p_star, 0.05)
        circuit = fpaa_decode(small, p_star, 0.05, circuit=True)
        assert circuit.decoder == 'fpaa_circuit'
        assert circuit.p_succ == pytest.approx(spectral.p_succ, abs=1e-6)
        assert circuit.f_decoding == pytest.approx(spectral.f_decoding, abs=1e-6)
