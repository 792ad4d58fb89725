import numpy as np
import pytest
from numpy.testing import assert_allclose

from biphoton.elements import (
    Aperture,
    FreeSpace,
    LensFourier,
    OpticalSystem,
    Phase,
    Relay,
    apply_element,
    impulse_response,
    propagate,
    random_phase_mask,
    response_bank,
)
from biphoton.errors import GridMismatchError
from biphoton.grid import ComplexField, GridSpec, PlaneKind, dirac_field, parity_flip
from biphoton.oracle import dft2_matrix, element_matrix, system_matrix

from conftest import amplitude_std, gaussian_field, random_field

WAVELENGTH = 710e-9
FOCAL = 75e-3


class TestRandomPhaseMask:
    def test_deterministic(self):
        grid = GridSpec(n=32, pitch=1e-5)
        a = random_phase_mask(grid, seed=7, correlation_length=0.0)
        b = random_phase_mask(grid, seed=7, correlation_length=0.0)
        assert np.array_equal(a.phases, b.phases)

    def test_different_seeds_differ(self):
        grid = GridSpec(n=32, pitch=1e-5)
        a = random_phase_mask(grid, seed=7)
        b = random_phase_mask(grid, seed=8)
        assert not np.array_equal(a.phases, b.phases)

    def test_pure_phase_modulus(self):
        grid = GridSpec(n=16, pitch=1e-5)
        mask = random_phase_mask(grid, seed=3)
        assert np.all(mask.phases >= 0.0) and np.all(mask.phases < 2 * np.pi)
        assert np.max(np.abs(np.abs(mask.transfer()) - 1.0)) < 1e-15

    def test_circular_variance_of_uniform_phases(self):
        grid = GridSpec(n=64, pitch=1e-5)
        mask = random_phase_mask(grid, seed=1, correlation_length=0.0)
        circ_var = 1.0 - abs(np.mean(np.exp(1j * mask.phases)))
        assert circ_var == pytest.approx(1.0, rel=0.10)

    def test_correlated_mask_is_smoother(self):
        grid = GridSpec(n=64, pitch=1e-5)
        rough = random_phase_mask(grid, seed=5, correlation_length=0.0)
        smooth = random_phase_mask(grid, seed=5, correlation_length=4e-5)

        def neighbor_coherence(mask):
            z = np.exp(1j * mask.phases)
            return abs(np.mean(z * np.conj(np.roll(z, 1, axis=0))))

        assert neighbor_coherence(rough) < 0.2
        assert neighbor_coherence(smooth) > 0.5
        # still wraps over the full phase range
        assert smooth.phases.max() > 5.0 and smooth.phases.min() < 1.0

    def test_rejects_negative_correlation_length(self):
        with pytest.raises(ValueError):
            random_phase_mask(GridSpec(n=8, pitch=1.0), seed=0, correlation_length=-1.0)


class TestElements:
    def test_phase_preserves_intensity(self, nf_grid_32, rng):
        field = random_field(nf_grid_32, rng)
        mask = random_phase_mask(nf_grid_32, seed=2)
        out = apply_element(Phase(mask), field)
        assert_allclose(out.intensity(), field.intensity(), rtol=1e-13)

    def test_phase_grid_mismatch(self, nf_grid_32, nf_grid_8, rng):
        mask = random_phase_mask(nf_grid_8, seed=2)
        with pytest.raises(GridMismatchError):
            apply_element(Phase(mask), random_field(nf_grid_32, rng))

    def test_lens_fourier_gaussian_waist(self):
        # waist w0 maps to lambda * f / (pi * w0), moment-checked
        grid = GridSpec(n=64, pitch=8e-6)
        w0 = 60e-6
        field = gaussian_field(grid, sigma=w0 / np.sqrt(2.0))
        lens = LensFourier(focal_length=FOCAL, wavelength=WAVELENGTH)
        out = apply_element(lens, field)
        assert out.grid.plane_kind is PlaneKind.FAR_FIELD
        expected_w1 = WAVELENGTH * FOCAL / (np.pi * w0)
        measured_sigma = amplitude_std(out.amplitudes, out.grid.pitch, axis=0)
        assert measured_sigma * np.sqrt(2.0) == pytest.approx(expected_w1, rel=0.02)

    def test_lens_fourier_output_pitch(self):
        grid = GridSpec(n=32, pitch=2e-6)
        lens = LensFourier(focal_length=FOCAL, wavelength=WAVELENGTH)
        out_grid = lens.output_grid(grid)
        assert out_grid.pitch == pytest.approx(WAVELENGTH * FOCAL / (32 * 2e-6))

    def test_free_space_zero_distance_is_identity(self, nf_grid_32, rng):
        field = random_field(nf_grid_32, rng)
        out = apply_element(FreeSpace(distance=0.0, wavelength=WAVELENGTH), field)
        assert np.max(np.abs(out.amplitudes - field.amplitudes)) < 1e-14

    def test_free_space_gaussian_beam_spread(self):
        # analytic Gaussian beam: w(z) = w0 sqrt(1 + (z / zR)^2)
        grid = GridSpec(n=128, pitch=4e-6)
        w0 = 40e-6
        z = 2.0 * np.pi * w0**2 / (2.0 * WAVELENGTH)  # exactly zR
        field = gaussian_field(grid, sigma=w0 / np.sqrt(2.0))
        out = apply_element(FreeSpace(distance=z, wavelength=WAVELENGTH), field)
        measured_w = amplitude_std(out.amplitudes, grid.pitch, axis=0) * np.sqrt(2.0)
        assert measured_w == pytest.approx(w0 * np.sqrt(2.0), rel=0.02)
        assert out.power == pytest.approx(field.power, rel=1e-12)

    def test_relay_metadata_and_parity(self, nf_grid_32, rng):
        field = random_field(nf_grid_32, rng)
        relay = Relay(magnification=2.0, invert=True)
        out = apply_element(relay, field)
        assert out.grid.pitch == pytest.approx(2e-5)
        assert_allclose(out.amplitudes, parity_flip(field.amplitudes))

    def test_aperture_clips_power(self, nf_grid_32):
        field = ComplexField(nf_grid_32, np.ones((32, 32), dtype=complex))
        out = apply_element(Aperture(diameter=8e-5), field)
        assert 0 < out.power < field.power

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            LensFourier(focal_length=0.0, wavelength=WAVELENGTH)
        with pytest.raises(ValueError):
            FreeSpace(distance=-1.0, wavelength=WAVELENGTH)
        with pytest.raises(ValueError):
            Relay(magnification=0.0)


class TestPropagate:
    def test_empty_chain_identity(self, nf_grid_32, rng):
        field = random_field(nf_grid_32, rng)
        system = OpticalSystem([], nf_grid_32)
        out = propagate(system, field)
        assert_allclose(out.amplitudes, field.amplitudes)

    def test_double_lens_is_parity(self, nf_grid_32, rng):
        field = random_field(nf_grid_32, rng)
        lens = LensFourier(FOCAL, WAVELENGTH)
        system = OpticalSystem([lens, lens], nf_grid_32)
        out = propagate(system, field)
        assert np.max(np.abs(out.amplitudes - parity_flip(field.amplitudes))) < 1e-10

    def test_lens_mask_lens_chain_against_matrix_oracle(self, nf_grid_8):
        # [lens, FF mask, lens] on a Dirac, checked in full against the
        # dense matrix composition oracle; the mask leaves the intensity
        # in its own (Fourier) plane untouched but scrambles the phase,
        # so the relayed image of a point source becomes speckle
        lens = LensFourier(FOCAL, WAVELENGTH)
        ff_grid = lens.output_grid(nf_grid_8)
        mask = random_phase_mask(ff_grid, seed=11)
        system = OpticalSystem([lens, Phase(mask), lens], nf_grid_8)
        delta = dirac_field(nf_grid_8, (2, 5))
        out = propagate(system, delta)

        dense = system_matrix(system)
        expected = (dense @ delta.amplitudes.ravel()).reshape(8, 8)
        assert_allclose(out.amplitudes, expected, atol=1e-12)

        # intensity at the mask's own plane is unchanged by the mask
        half = propagate(OpticalSystem([lens], nf_grid_8), delta)
        masked = apply_element(Phase(mask), half)
        assert_allclose(masked.intensity(), half.intensity(), atol=1e-14)

        # power still conserved through the full chain
        assert out.power == pytest.approx(delta.power, rel=1e-12)

    def test_propagate_linearity(self, nf_grid_32, rng):
        lens = LensFourier(FOCAL, WAVELENGTH)
        mask = random_phase_mask(nf_grid_32, seed=4)
        system = OpticalSystem([Phase(mask), lens], nf_grid_32)
        f = random_field(nf_grid_32, rng)
        g = random_field(nf_grid_32, rng)
        combined = ComplexField(nf_grid_32, 0.7 * f.amplitudes + 2.1j * g.amplitudes)
        lhs = propagate(system, combined).amplitudes
        rhs = 0.7 * propagate(system, f).amplitudes + 2.1j * propagate(system, g).amplitudes
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))

    def test_energy_conservation_through_chain(self, nf_grid_32, rng):
        field = random_field(nf_grid_32, rng)
        lens = LensFourier(FOCAL, WAVELENGTH)
        chain = [
            Phase(random_phase_mask(nf_grid_32, seed=1)),
            lens,
            FreeSpace(distance=5e-3, wavelength=WAVELENGTH),
            lens,
        ]
        system = OpticalSystem(chain, nf_grid_32)
        out = propagate(system, field)
        assert out.power == pytest.approx(field.power, rel=1e-10)

    def test_grid_mismatch_raises(self, nf_grid_32, nf_grid_8, rng):
        system = OpticalSystem([], nf_grid_8)
        with pytest.raises(GridMismatchError):
            propagate(system, random_field(nf_grid_32, rng))

    def test_determinism(self, nf_grid_32):
        lens = LensFourier(FOCAL, WAVELENGTH)
        mask = random_phase_mask(nf_grid_32, seed=9)
        system = OpticalSystem([Phase(mask), lens], nf_grid_32)
        delta = dirac_field(nf_grid_32, (3, 4))
        a = propagate(system, delta).amplitudes
        b = propagate(system, delta).amplitudes
        assert np.array_equal(a, b)


class TestImpulseResponse:
    def test_identity_chain(self, nf_grid_8):
        out = impulse_response(OpticalSystem([], nf_grid_8), (3, 5))
        expected = np.zeros((8, 8))
        expected[3, 5] = 1.0
        assert_allclose(out.amplitudes, expected)

    def test_4f_parity_image(self, nf_grid_8):
        lens = LensFourier(FOCAL, WAVELENGTH)
        system = OpticalSystem([lens, lens], nf_grid_8)
        out = impulse_response(system, (2, 7))
        peak = np.unravel_index(np.argmax(np.abs(out.amplitudes)), (8, 8))
        assert peak == ((8 - 2) % 8, (8 - 7) % 8)
        assert np.abs(out.amplitudes[peak]) == pytest.approx(1.0, abs=1e-10)

    def test_single_lens_flat_modulus(self, nf_grid_8):
        lens = LensFourier(FOCAL, WAVELENGTH)
        out = impulse_response(OpticalSystem([lens], nf_grid_8), (1, 6))
        assert_allclose(np.abs(out.amplitudes), 1.0 / 8.0, atol=1e-14)

    def test_out_of_range_pixel(self, nf_grid_8):
        with pytest.raises(IndexError):
            impulse_response(OpticalSystem([], nf_grid_8), (8, 0))

    def test_response_bank_matches_per_pixel_responses(self, nf_grid_8):
        lens = LensFourier(FOCAL, WAVELENGTH)
        mask = random_phase_mask(nf_grid_8, seed=6)
        system = OpticalSystem([Phase(mask), lens], nf_grid_8)
        bank = response_bank(system)
        for r in [0, 9, 37, 63]:
            pixel = divmod(r, 8)
            single = impulse_response(system, pixel).amplitudes.ravel()
            assert_allclose(bank[r], single, atol=1e-14)


def test_oracle_element_matrices_match_elements(nf_grid_8, rng):
    field = random_field(nf_grid_8, rng)
    lens = LensFourier(FOCAL, WAVELENGTH)
    free = FreeSpace(distance=3e-3, wavelength=WAVELENGTH)
    mask = Phase(random_phase_mask(nf_grid_8, seed=12))
    relay = Relay(magnification=2.0, invert=True)
    for element in (lens, free, mask, relay):
        dense = element_matrix(element, nf_grid_8)
        expected = (dense @ field.amplitudes.ravel()).reshape(8, 8)
        out = apply_element(element, field)
        assert_allclose(out.amplitudes, expected, atol=1e-12)


def test_oracle_dft_matrix_is_unitary():
    mat = dft2_matrix(GridSpec(n=8, pitch=1.0))
    assert_allclose(mat @ mat.conj().T, np.eye(64), atol=1e-12)
