import cmath
import math

import numpy as np
import pytest

from nvacoustic.errors import ValidationError
from nvacoustic.spin import (CouplingRatios, DriveFields, StressState,
                             build_rwa_hamiltonian, compose_sq_rabi,
                             rwa_components, spin1_operators, wrap_phase)


def test_spin1_matrices_definition():
    ops = spin1_operators()
    assert np.allclose(np.diag(ops["Sz"]), [1.0, 0.0, -1.0])
    total = ops["Sx"] @ ops["Sx"] + ops["Sy"] @ ops["Sy"] + ops["Sz"] @ ops["Sz"]
    assert np.allclose(total, 2.0 * np.eye(3), atol=1e-14)


def test_spin1_commutators_cyclic():
    ops = spin1_operators()
    for a, b, c in (("Sx", "Sy", "Sz"), ("Sy", "Sz", "Sx"), ("Sz", "Sx", "Sy")):
        comm = ops[a] @ ops[b] - ops[b] @ ops[a]
        assert np.allclose(comm, 1j * ops[c], atol=1e-14)


def test_zero_drive_hamiltonian_is_bare_splitting():
    h = build_rwa_hamiltonian(DriveFields(drive_freq_ghz=3.0), StressState(),
                              CouplingRatios(), t_us=0.0)
    assert np.allclose(h, np.diag([2870.0, 0.0, 2870.0]))


def test_stress_sets_dq_coupling_amplitude():
    stress = StressState(sigma_zz_gpa=0.1, b_mhz_per_gpa=-2.3)
    c = rwa_components(DriveFields(drive_freq_ghz=3.0), stress, CouplingRatios())
    assert c.omega_dq_mhz == pytest.approx(0.92, abs=1e-12)


def test_axial_stress_shifts_both_outer_levels_equally():
    stress = StressState(sigma_zz_gpa=0.1, a1_mhz_per_gpa=4.86)
    c = rwa_components(DriveFields(drive_freq_ghz=3.0), stress, CouplingRatios())
    assert c.e_plus_mhz - 2870.0 == pytest.approx(0.486, abs=1e-9)
    assert c.e_minus_mhz - 2870.0 == pytest.approx(0.486, abs=1e-9)


def test_hamiltonian_hermitian_at_all_times(rng):
    for _ in range(50):
        fields = DriveFields(
            b_parallel_g=rng.uniform(-600, 600),
            omega_b_mhz=complex(rng.normal(), rng.normal()),
            omega_sigma2_mhz=complex(rng.normal(), rng.normal()),
            drive_freq_ghz=rng.uniform(2.5, 3.5),
        )
        stress = StressState(sigma_zz_gpa=rng.uniform(0, 0.3),
                             a1_mhz_per_gpa=4.86, b_mhz_per_gpa=-2.3,
                             b_prime_mhz_per_gpa=-1.63)
        ratios = CouplingRatios(alpha=rng.uniform(0, 1.5), beta=rng.uniform(0.5, 2),
                                phi_rad=rng.uniform(-math.pi, math.pi))
        t = rng.uniform(0, 4.0)
        h = build_rwa_hamiltonian(fields, stress, ratios, t)
        assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_time_phase_factors_rotate_at_drive_frequency():
    fields = DriveFields(omega_b_mhz=1.0, drive_freq_ghz=3.0)
    h0 = build_rwa_hamiltonian(fields, StressState(), CouplingRatios(), 0.0)
    t = 1.25e-4
    ht = build_rwa_hamiltonian(fields, StressState(), CouplingRatios(), t)
    expected = h0[0, 1] * cmath.exp(-2j * math.pi * 3000.0 * t)
    assert ht[0, 1] == pytest.approx(expected, abs=1e-12)
    assert ht[1, 0] == pytest.approx(expected.conjugate(), abs=1e-12)


def test_negative_time_rejected():
    with pytest.raises(ValidationError):
        build_rwa_hamiltonian(DriveFields(), StressState(), CouplingRatios(), -1e-6)


def test_stress_linearity_in_dq_and_sq_channels():
    ratios = CouplingRatios(alpha=0.0)
    fields = DriveFields(drive_freq_ghz=3.0)
    one = rwa_components(fields, StressState(sigma_zz_gpa=0.05, b_mhz_per_gpa=-2.3,
                                             b_prime_mhz_per_gpa=-1.63), ratios)
    two = rwa_components(fields, StressState(sigma_zz_gpa=0.10, b_mhz_per_gpa=-2.3,
                                             b_prime_mhz_per_gpa=-1.63), ratios)
    assert two.omega_dq_mhz == pytest.approx(2.0 * one.omega_dq_mhz, rel=1e-14)
    assert two.omega_plus_mhz == pytest.approx(2.0 * one.omega_plus_mhz, rel=1e-14)


def test_compose_collinear_phasors():
    ratios = CouplingRatios(alpha=0.5, beta=1.3, phi_rad=0.0)
    out = compose_sq_rabi(1.0, 2.0, ratios, z_um=0.0, wavelength_um=5.7, sign=+1)
    assert abs(out) == pytest.approx(2.3, abs=1e-12)


def test_compose_node_kills_acoustic_part():
    ratios = CouplingRatios(alpha=0.5, beta=1.3, phi_rad=0.0)
    out = compose_sq_rabi(1.0, 2.0, ratios, z_um=5.7 / 4, wavelength_um=5.7, sign=+1)
    assert abs(out) == pytest.approx(1.3, abs=1e-12)


def test_compose_antiparallel_phasors():
    # beta*1.0*exp(i*pi) + 0.5*2.0 = -1.3 + 1.0
    ratios = CouplingRatios(alpha=0.5, beta=1.3, phi_rad=math.pi)
    out = compose_sq_rabi(1.0, 2.0, ratios, z_um=0.0, wavelength_um=5.7, sign=+1)
    assert abs(out) == pytest.approx(abs(-1.3 + 1.0), abs=1e-12)


def test_compose_sign_selects_branch():
    ratios = CouplingRatios(alpha=0.5, beta=1.0, phi_rad=0.0)
    plus = compose_sq_rabi(1.0, 2.0, ratios, 0.0, 5.7, +1)
    minus = compose_sq_rabi(1.0, 2.0, ratios, 0.0, 5.7, -1)
    assert plus == pytest.approx(2.0)
    assert minus == pytest.approx(0.0)


def test_compose_phase_covariance(rng):
    ratios = CouplingRatios(alpha=0.7, beta=1.3, phi_rad=0.4)
    for _ in range(20):
        omega_b = complex(rng.normal(), rng.normal())
        omega_s = complex(rng.normal(), rng.normal())
        chi = rng.uniform(-math.pi, math.pi)
        z = rng.uniform(0, 5.7 / 4)
        base = compose_sq_rabi(omega_b, omega_s, ratios, z, 5.7, +1)
        rotated = compose_sq_rabi(omega_b * cmath.exp(1j * chi),
                                  omega_s * cmath.exp(1j * chi), ratios, z, 5.7, +1)
        assert rotated == pytest.approx(base * cmath.exp(1j * chi), abs=1e-12)
        assert abs(rotated) == pytest.approx(abs(base), abs=1e-12)


def test_compose_acoustic_linearity_in_stress_amplitude():
    ratios = CouplingRatios(alpha=0.5, beta=1.3, phi_rad=0.2)
    base = compose_sq_rabi(1.0, 2.0, ratios, 1.0, 5.7, +1)
    doubled = compose_sq_rabi(1.0, 4.0, ratios, 1.0, 5.7, +1)
    acoustic = doubled - base
    magnetic = compose_sq_rabi(1.0, 0.0, ratios, 1.0, 5.7, +1)
    assert base - magnetic == pytest.approx(acoustic, abs=1e-12)


def test_compose_rejects_out_of_range_position():
    ratios = CouplingRatios()
    with pytest.raises(ValidationError):
        compose_sq_rabi(1.0, 1.0, ratios, z_um=3.0, wavelength_um=5.7, sign=+1)
    with pytest.raises(ValidationError):
        compose_sq_rabi(1.0, 1.0, ratios, z_um=0.0, wavelength_um=-1.0, sign=+1)
    with pytest.raises(ValidationError):
        compose_sq_rabi(1.0, 1.0, ratios, z_um=0.0, wavelength_um=5.7, sign=2)


def test_coupling_ratio_validation():
    with pytest.raises(ValidationError):
        CouplingRatios(alpha=-0.1)
    with pytest.raises(ValidationError):
        CouplingRatios(alpha=1.6)
    with pytest.raises(ValidationError):
        CouplingRatios(beta=0.0)
    assert CouplingRatios(phi_rad=3 * math.pi).phi_rad == pytest.approx(math.pi)


def test_wrap_phase_range():
    for phi in (-math.pi, math.pi, 0.0, 5.0, -7.0):
        wrapped = wrap_phase(phi)
        assert -math.pi < wrapped <= math.pi


def test_drive_fields_from_polar_rejects_negative_amplitude():
    with pytest.raises(ValidationError):
        DriveFields.from_polar(0.0, -1.0, 0.0, 0.0, 0.0, 3.0)
