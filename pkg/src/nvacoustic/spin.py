"""Spin-1 operator algebra and dual-drive Hamiltonian construction.

All matrices use the fixed basis ordering ``{|+1>, |0>, |-1>}``.  Energies
and Rabi fields are handled in MHz internally; drive/transition frequencies
cross the API in GHz, magnetic fields in gauss, stress in GPa.  A matrix
entry of x MHz corresponds to a phase evolution exp(-2j*pi*x*t) with t in
microseconds.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

#: Basis ordering used by every 3x3 matrix in this package.
BASIS = ("+1", "0", "-1")

_SQRT2 = math.sqrt(2.0)

_SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
_SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
_SZ = np.array([[1, 0, 0], [0, 0, 0], [0, 0, -1]], dtype=complex)


def spin1_operators() -> dict[str, np.ndarray]:
    """Return the spin-1 matrices ``{"Sx", "Sy", "Sz"}`` in the package basis.

    The matrices satisfy ``[Sx, Sy] = 1j*Sz`` (and cyclic permutations) and
    ``Sx**2 + Sy**2 + Sz**2 = 2*I``.  Fresh copies are returned so callers
    may mutate them freely.
    """
    return {"Sx": _SX.copy(), "Sy": _SY.copy(), "Sz": _SZ.copy()}


def wrap_phase(phi_rad: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.remainder(phi_rad, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class SpinConstants:
    """Ground-state constants: zero-field splitting and gyromagnetic ratio."""

    d_ghz: float = 2.870
    gamma_e_mhz_per_g: float = 2.802

    def __post_init__(self):
        if self.d_ghz <= 0 or self.gamma_e_mhz_per_g <= 0:
            raise ValidationError("spin constants must be positive")

    @property
    def d_mhz(self) -> float:
        return self.d_ghz * 1e3


DEFAULT_CONSTANTS = SpinConstants()


@dataclass(frozen=True)
class CouplingRatios:
    """Dimensionless drive-composition parameters.

    alpha
        Ratio of the single-quantum to double-quantum acoustic Rabi fields.
    beta
        Lead-to-resonator scaling of the current-induced magnetic field.
    phi_rad
        Spatial phase offset between the magnetic and acoustic phasors,
        wrapped into (-pi, pi] on construction.
    """

    alpha: float = 0.0
    beta: float = 1.0
    phi_rad: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.5:
            raise ValidationError(f"alpha={self.alpha} outside [0, 1.5]")
        if self.beta <= 0.0:
            raise ValidationError("beta must be positive")
        object.__setattr__(self, "phi_rad", wrap_phase(self.phi_rad))


@dataclass(frozen=True)
class DriveFields:
    """Drive configuration at one location and frequency.

    ``omega_b_mhz`` is the complex transverse-magnetic Rabi phasor and
    ``omega_sigma2_mhz`` the complex double-quantum acoustic Rabi phasor,
    both in MHz.  Amplitude and phase of a phasor are ``abs()`` and
    ``cmath.phase()``; phases therefore live in (-pi, pi] by construction.
    """

    b_parallel_g: float = 0.0
    omega_b_mhz: complex = 0j
    omega_sigma2_mhz: complex = 0j
    drive_freq_ghz: float = 2.870

    def __post_init__(self):
        values = (self.b_parallel_g, self.omega_b_mhz, self.omega_sigma2_mhz,
                  self.drive_freq_ghz)
        if not all(np.isfinite(v) for v in values):
            raise ValidationError("drive fields must be finite")
        if self.drive_freq_ghz <= 0:
            raise ValidationError("drive frequency must be positive")

    @classmethod
    def from_polar(cls, b_parallel_g: float, omega_b_amp_mhz: float,
                   omega_b_phase_rad: float, omega_sigma2_amp_mhz: float,
                   omega_sigma2_phase_rad: float,
                   drive_freq_ghz: float) -> "DriveFields":
        if omega_b_amp_mhz < 0 or omega_sigma2_amp_mhz < 0:
            raise ValidationError("Rabi amplitudes must be non-negative")
        return cls(
            b_parallel_g=b_parallel_g,
            omega_b_mhz=cmath.rect(omega_b_amp_mhz, omega_b_phase_rad),
            omega_sigma2_mhz=cmath.rect(omega_sigma2_amp_mhz,
                                        omega_sigma2_phase_rad),
            drive_freq_ghz=drive_freq_ghz,
        )


@dataclass(frozen=True)
class StressState:
    """Uniaxial stress along the crystal [001] axis and its susceptibilities.

    Susceptibilities are in MHz/GPa.  The diagonal shift on both |+1> and
    |-1> is ``a1*sigma_zz``; the double-quantum coupling amplitude is
    ``4*b*sigma_zz`` and the single-quantum acoustic amplitude
    ``2*sqrt(2)*b_prime*sigma_zz``.
    """

    sigma_zz_gpa: float = 0.0
    a1_mhz_per_gpa: float = 0.0
    b_mhz_per_gpa: float = 0.0
    b_prime_mhz_per_gpa: float = 0.0

    def __post_init__(self):
        values = (self.sigma_zz_gpa, self.a1_mhz_per_gpa,
                  self.b_mhz_per_gpa, self.b_prime_mhz_per_gpa)
        if not all(np.isfinite(v) for v in values):
            raise ValidationError("stress state must be finite")


@dataclass(frozen=True)
class RwaComponents:
    """Scalar ingredients of the rotating-wave Hamiltonian.

    ``e_plus_mhz``/``e_minus_mhz`` are the |+1>/|-1> level energies,
    ``omega_plus/minus_mhz`` the two single-quantum Rabi amplitudes and
    ``omega_dq_mhz`` the double-quantum amplitude (all real, MHz).
    """

    e_plus_mhz: float
    e_minus_mhz: float
    omega_plus_mhz: float
    omega_minus_mhz: float
    omega_dq_mhz: float
    drive_freq_ghz: float

    @property
    def drive_freq_mhz(self) -> float:
        return self.drive_freq_ghz * 1e3


def rwa_components(fields: DriveFields, stress: StressState,
                   ratios: CouplingRatios,
                   constants: SpinConstants = DEFAULT_CONSTANTS,
                   ) -> RwaComponents:
    """Compose level energies and Rabi amplitudes for the RWA matrix.

    The magnetic phasor is ``beta * omega_b * exp(1j*phi)``.  The acoustic
    single-quantum phasor combines the field route ``alpha * omega_sigma2``
    with the stress route ``2*sqrt(2)*b_prime*sigma_zz``; the two
    single-quantum amplitudes are the magnitudes of the complex sum and
    difference of the magnetic and acoustic phasors.
    """
    zeeman = constants.gamma_e_mhz_per_g * fields.b_parallel_g
    shift = stress.a1_mhz_per_gpa * stress.sigma_zz_gpa
    dq_phasor = (fields.omega_sigma2_mhz
                 + 4.0 * stress.b_mhz_per_gpa * stress.sigma_zz_gpa)
    magnetic = ratios.beta * fields.omega_b_mhz * cmath.exp(1j * ratios.phi_rad)
    acoustic = (ratios.alpha * fields.omega_sigma2_mhz
                + 2.0 * _SQRT2 * stress.b_prime_mhz_per_gpa * stress.sigma_zz_gpa)
    return RwaComponents(
        e_plus_mhz=constants.d_mhz + zeeman + shift,
        e_minus_mhz=constants.d_mhz - zeeman + shift,
        omega_plus_mhz=abs(magnetic + acoustic),
        omega_minus_mhz=abs(magnetic - acoustic),
        omega_dq_mhz=abs(dq_phasor),
        drive_freq_ghz=fields.drive_freq_ghz,
    )


def build_rwa_hamiltonian(fields: DriveFields, stress: StressState,
                          ratios: CouplingRatios, t_us: float,
                          constants: SpinConstants = DEFAULT_CONSTANTS,
                          ) -> np.ndarray:
    """Rotating-wave Hamiltonian matrix (MHz) at time ``t_us``.

    Layout in the ``{|+1>, |0>, |-1>}`` basis::

        [ E+            W+/2 e^-iwt   W2/2 e^-iwt ]
        [ W+/2 e^+iwt   0             W-/2 e^+iwt ]
        [ W2/2 e^+iwt   W-/2 e^-iwt   E-          ]

    with real amplitudes W+-, W2 from :func:`rwa_components`, so the matrix
    is Hermitian at every time.  The oscillating phases are kept here; any
    frame transformation is the integrator's business.
    """
    if t_us < 0:
        raise ValidationError("time must be non-negative")
    c = rwa_components(fields, stress, ratios, constants)
    phase = 2.0 * math.pi * c.drive_freq_mhz * t_us
    down = cmath.exp(-1j * phase)
    up = down.conjugate()
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = c.e_plus_mhz
    h[2, 2] = c.e_minus_mhz
    h[0, 1] = 0.5 * c.omega_plus_mhz * down
    h[1, 0] = 0.5 * c.omega_plus_mhz * up
    h[0, 2] = 0.5 * c.omega_dq_mhz * down
    h[2, 0] = 0.5 * c.omega_dq_mhz * up
    h[1, 2] = 0.5 * c.omega_minus_mhz * up
    h[2, 1] = 0.5 * c.omega_minus_mhz * down
    return h


def compose_sq_rabi(omega_b_lead_mhz: complex, omega_sigma2_mhz: complex,
                    ratios: CouplingRatios, z_um: float, wavelength_um: float,
                    sign: int) -> complex:
    """Local single-quantum Rabi phasor at depth ``z_um`` in the standing wave.

    Returns ``beta*omega_b_lead*exp(1j*phi) + sign*alpha*omega_sigma2*cos(2*pi*z/lambda)``
    as a complex number; the magnitude is the local Rabi frequency in MHz.
    ``sign`` is +1 for the |0> <-> |+1> branch and -1 for |0> <-> |-1>.
    """
    if wavelength_um <= 0:
        raise ValidationError("wavelength must be positive")
    if not 0.0 <= z_um <= wavelength_um / 4.0 + 1e-12:
        raise ValidationError(
            f"z={z_um} um outside [0, lambda/4]={wavelength_um / 4.0} um")
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    magnetic = ratios.beta * omega_b_lead_mhz * cmath.exp(1j * ratios.phi_rad)
    acoustic = ratios.alpha * omega_sigma2_mhz * math.cos(
        2.0 * math.pi * z_um / wavelength_um)
    return magnetic + sign * acoustic
