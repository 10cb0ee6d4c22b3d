"""Spin-stress coupling algebra and stress/strain susceptibility mapping.

Stress tensors are expressed by their six Voigt components in the cubic
crystal frame (X, Y, Z along the cube axes).  Strain-side expressions use
the defect frame (x = [-1,-1,2]/sqrt(6), y = [1,-1,0]/sqrt(2),
z = [1,1,1]/sqrt(3)); tensors carry a frame tag so the two cannot be
mixed accidentally.  Susceptibilities are MHz/GPa on the stress side and
GHz/strain on the strain side.

A small literature catalog of measured and calculated coefficient sets is
included for comparison work; sources are tagged by citation key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MissingCoefficientError, ValidationError

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)

#: Rows are the defect-frame axes expressed in crystal coordinates.
NV_FRAME_ROTATION = np.array([
    [-1.0, -1.0, 2.0],
    [1.0, -1.0, 0.0],
    [1.0, 1.0, 1.0],
])
NV_FRAME_ROTATION[0] /= math.sqrt(6.0)
NV_FRAME_ROTATION[1] /= math.sqrt(2.0)
NV_FRAME_ROTATION[2] /= math.sqrt(3.0)


@dataclass(frozen=True)
class Uncertain:
    """A value with a one-sigma uncertainty."""

    value: float
    err: float = 0.0

    def __post_init__(self):
        if self.err < 0:
            raise ValidationError("uncertainty must be non-negative")

    def scaled(self, factor: float) -> "Uncertain":
        return Uncertain(self.value * factor, self.err * abs(factor))

    def __format__(self, spec: str) -> str:
        spec = spec or ".4g"
        return f"{self.value:{spec}} +/- {self.err:{spec}}"


@dataclass(frozen=True)
class StressTensor:
    """Symmetric stress tensor in Voigt components (GPa), crystal frame."""

    sigma_xx: float = 0.0
    sigma_yy: float = 0.0
    sigma_zz: float = 0.0
    sigma_yz: float = 0.0
    sigma_zx: float = 0.0
    sigma_xy: float = 0.0
    frame: str = "crystal"

    def __post_init__(self):
        comps = (self.sigma_xx, self.sigma_yy, self.sigma_zz,
                 self.sigma_yz, self.sigma_zx, self.sigma_xy)
        if not all(np.isfinite(c) for c in comps):
            raise ValidationError("stress components must be finite")
        if self.frame != "crystal":
            raise ValidationError("stress tensors are defined in the crystal frame")

    def as_matrix(self) -> np.ndarray:
        return np.array([
            [self.sigma_xx, self.sigma_xy, self.sigma_zx],
            [self.sigma_xy, self.sigma_yy, self.sigma_yz],
            [self.sigma_zx, self.sigma_yz, self.sigma_zz],
        ])

    @classmethod
    def uniaxial(cls, sigma_zz_gpa: float) -> "StressTensor":
        return cls(sigma_zz=sigma_zz_gpa)


@dataclass(frozen=True)
class StrainTensor:
    """Symmetric strain tensor components (dimensionless) with a frame tag."""

    eps_xx: float
    eps_yy: float
    eps_zz: float
    eps_yz: float
    eps_zx: float
    eps_xy: float
    frame: str

    def as_matrix(self) -> np.ndarray:
        return np.array([
            [self.eps_xx, self.eps_xy, self.eps_zx],
            [self.eps_xy, self.eps_yy, self.eps_yz],
            [self.eps_zx, self.eps_yz, self.eps_zz],
        ])

    @classmethod
    def from_matrix(cls, m: np.ndarray, frame: str) -> "StrainTensor":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3) or np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ValidationError("strain matrix must be symmetric 3x3")
        return cls(eps_xx=m[0, 0], eps_yy=m[1, 1], eps_zz=m[2, 2],
                   eps_yz=m[1, 2], eps_zx=m[0, 2], eps_xy=m[0, 1], frame=frame)


@dataclass(frozen=True)
class StiffnessConstants:
    """Cubic elastic stiffness constants of diamond (GPa)."""

    c11: float = 1079.0
    c12: float = 124.0
    c44: float = 578.0
    c11_err: float = 5.0
    c12_err: float = 5.0
    c44_err: float = 2.0

    def __post_init__(self):
        if min(self.c11, self.c12, self.c44) <= 0:
            raise ValidationError("stiffness constants must be positive")
        if self.c11 <= self.c12:
            raise ValidationError("cubic stability requires C11 > C12")


@dataclass(frozen=True)
class ElasticScalars:
    """Isotropic description used for the uniaxial strain relation."""

    e_gpa: float
    nu: float

    def __post_init__(self):
        if self.e_gpa <= 0:
            raise ValidationError("Young's modulus must be positive")
        if not 0.0 < self.nu < 0.5:
            raise ValidationError("Poisson ratio must lie in (0, 0.5)")


@dataclass(frozen=True)
class SusceptibilitySet:
    """Stress susceptibilities (MHz/GPa); absent entries stay None.

    ``b_prime_over_b`` carries a relational entry (the single-quantum to
    double-quantum ratio) for datasets that constrain only the ratio.
    """

    a1: Uncertain | None = None
    a2: Uncertain | None = None
    b: Uncertain | None = None
    c: Uncertain | None = None
    b_prime: Uncertain | None = None
    c_prime: Uncertain | None = None
    b_prime_over_b: Uncertain | None = None
    source: str = ""


@dataclass(frozen=True)
class StrainSusceptibilitySet:
    """Strain susceptibilities (GHz/strain); absent entries stay None."""

    lambda_a1: Uncertain | None = None
    lambda_a2: Uncertain | None = None
    lambda_b: Uncertain | None = None
    lambda_c: Uncertain | None = None
    lambda_b_prime: Uncertain | None = None
    lambda_c_prime: Uncertain | None = None
    source: str = ""


@dataclass(frozen=True)
class LegacyStrainCoupling:
    """Older axial/transverse parameterization (GHz/strain)."""

    d_parallel: Uncertain
    d_perp: Uncertain
    source: str = ""


@dataclass(frozen=True)
class Catalog:
    stress_rows: tuple[SusceptibilitySet, ...]
    strain_rows: tuple[StrainSusceptibilitySet, ...]
    legacy_rows: tuple[LegacyStrainCoupling, ...]

    def stress_row(self, source: str) -> SusceptibilitySet:
        for row in self.stress_rows:
            if row.source == source:
                return row
        raise KeyError(source)

    def strain_row(self, source: str) -> StrainSusceptibilitySet:
        for row in self.strain_rows:
            if row.source == source:
                return row
        raise KeyError(source)


def _require(value: Uncertain | None, name: str, reason: str) -> float:
    if value is None:
        raise MissingCoefficientError(name, reason)
    return value.value


def coupling_coefficients(sigma: StressTensor,
                          sus: SusceptibilitySet) -> dict[str, float]:
    """Spin-Hamiltonian coupling coefficients (MHz) from a stress tensor.

    Returns ``{"M_z", "M_x", "M_y", "N_x", "N_y"}``: M_z multiplies Sz^2,
    (M_x, M_y) the double-quantum operators and (N_x, N_y) the
    single-quantum operators.  A susceptibility is only required when the
    stress combination multiplying it is nonzero; a missing required one
    raises :class:`MissingCoefficientError` naming it.
    """
    normal_sum = sigma.sigma_xx + sigma.sigma_yy + sigma.sigma_zz
    shear_sum = sigma.sigma_yz + sigma.sigma_zx + sigma.sigma_xy
    dev_normal = 2.0 * sigma.sigma_zz - sigma.sigma_xx - sigma.sigma_yy
    dev_shear = 2.0 * sigma.sigma_xy - sigma.sigma_yz - sigma.sigma_zx
    diff_normal = sigma.sigma_xx - sigma.sigma_yy
    diff_shear = sigma.sigma_yz - sigma.sigma_zx

    def term(coefficient, name, multiplier):
        if multiplier == 0.0:
            return 0.0
        return _require(coefficient, name,
                        f"stress combination {multiplier:+g} GPa is nonzero") * multiplier

    m_z = (term(sus.a1, "a1", normal_sum) + 2.0 * term(sus.a2, "a2", shear_sum))
    m_x = term(sus.b, "b", dev_normal) + term(sus.c, "c", dev_shear)
    m_y = _SQRT3 * (term(sus.b, "b", diff_normal) + term(sus.c, "c", diff_shear))
    n_x = term(sus.b_prime, "b_prime", dev_normal) + term(sus.c_prime, "c_prime", dev_shear)
    n_y = _SQRT3 * (term(sus.b_prime, "b_prime", diff_normal)
                    + term(sus.c_prime, "c_prime", diff_shear))
    return {"M_z": m_z, "M_x": m_x, "M_y": m_y, "N_x": n_x, "N_y": n_y}


def strain_coupling_coefficients(strain: StrainTensor,
                                 lam: StrainSusceptibilitySet) -> dict[str, float]:
    """Coupling coefficients (MHz) from a defect-frame strain tensor.

    Counterpart of :func:`coupling_coefficients` on the strain side; the
    single-quantum terms use the primed strain susceptibilities.
    """
    if strain.frame != "nv":
        raise ValidationError(
            f"strain-side expressions require the defect frame, got {strain.frame!r}")

    def need(value, name):
        if value is None:
            raise MissingCoefficientError(name, "strain-side evaluation")
        return value.value * 1e3  # GHz/strain -> MHz/strain

    m_z = (need(lam.lambda_a1, "lambda_a1") * strain.eps_zz
           + need(lam.lambda_a2, "lambda_a2") * (strain.eps_xx + strain.eps_yy))
    m_x = (need(lam.lambda_b, "lambda_b") * (strain.eps_xx - strain.eps_yy)
           + 2.0 * need(lam.lambda_c, "lambda_c") * strain.eps_zx)
    m_y = (-2.0 * need(lam.lambda_b, "lambda_b") * strain.eps_xy
           + 2.0 * need(lam.lambda_c, "lambda_c") * strain.eps_yz)
    n_x = (need(lam.lambda_b_prime, "lambda_b_prime") * (strain.eps_xx - strain.eps_yy)
           + 2.0 * need(lam.lambda_c_prime, "lambda_c_prime") * strain.eps_zx)
    n_y = (-2.0 * need(lam.lambda_b_prime, "lambda_b_prime") * strain.eps_xy
           + 2.0 * need(lam.lambda_c_prime, "lambda_c_prime") * strain.eps_yz)
    return {"M_z": m_z, "M_x": m_x, "M_y": m_y, "N_x": n_x, "N_y": n_y}


def stress_to_strain_susceptibility(
        sus: SusceptibilitySet,
        stiffness: StiffnessConstants = StiffnessConstants(),
) -> StrainSusceptibilitySet:
    """Map stress susceptibilities (MHz/GPa) to strain ones (GHz/strain).

    Each output needs both members of its input pair (a1/a2, b/c, b'/c');
    pairs that are entirely absent are skipped, while a half-present pair
    raises :class:`MissingCoefficientError`.  Uncertainties are propagated
    to first order, including the stiffness-constant uncertainties.
    """
    c11, c12, c44 = stiffness.c11, stiffness.c12, stiffness.c44
    dc11, dc12, dc44 = stiffness.c11_err, stiffness.c12_err, stiffness.c44_err
    bulk = c11 + 2.0 * c12
    shear = c11 - c12

    def pair(first, second, names):
        if first is None and second is None:
            return None
        if first is None or second is None:
            missing = names[0] if first is None else names[1]
            raise MissingCoefficientError(missing, f"needed with '{names[0]}'/'{names[1]}' pair")
        return first, second

    def combine(u, ku, dk_sq, v, kv, dl_sq):
        # lambda = ku*u + kv*v with independent errors on everything
        value = ku * u.value + kv * v.value
        var = ((ku * u.err) ** 2 + (kv * v.err) ** 2
               + (u.value ** 2) * dk_sq + (v.value ** 2) * dl_sq)
        return Uncertain(value, math.sqrt(var)).scaled(1e-3)  # MHz -> GHz

    var_bulk = dc11 ** 2 + 4.0 * dc12 ** 2
    var_shear = dc11 ** 2 + dc12 ** 2

    lambda_a1 = lambda_a2 = lambda_b = lambda_c = None
    lambda_bp = lambda_cp = None

    a_pair = pair(sus.a1, sus.a2, ("a1", "a2"))
    if a_pair is not None:
        a1, a2 = a_pair
        lambda_a1 = combine(a1, bulk, var_bulk, a2, 4.0 * c44, 16.0 * dc44 ** 2)
        lambda_a2 = combine(a1, bulk, var_bulk, a2, -2.0 * c44, 4.0 * dc44 ** 2)

    b_pair = pair(sus.b, sus.c, ("b", "c"))
    if b_pair is not None:
        b, c = b_pair
        lambda_b = combine(b, shear, var_shear, c, 2.0 * c44, 4.0 * dc44 ** 2)
        lambda_c = combine(b, _SQRT2 * shear, 2.0 * var_shear,
                           c, -_SQRT2 * c44, 2.0 * dc44 ** 2)

    p_pair = pair(sus.b_prime, sus.c_prime, ("b_prime", "c_prime"))
    if p_pair is not None:
        bp, cp = p_pair
        lambda_bp = combine(bp, shear, var_shear, cp, 2.0 * c44, 4.0 * dc44 ** 2)
        lambda_cp = combine(bp, _SQRT2 * shear, 2.0 * var_shear,
                            cp, -_SQRT2 * c44, 2.0 * dc44 ** 2)

    return StrainSusceptibilitySet(
        lambda_a1=lambda_a1, lambda_a2=lambda_a2,
        lambda_b=lambda_b, lambda_c=lambda_c,
        lambda_b_prime=lambda_bp, lambda_c_prime=lambda_cp,
        source=sus.source,
    )


def uniaxial_strain(sigma_zz_gpa: float,
                    elastic: ElasticScalars) -> dict[str, float]:
    """Normal strain triple produced by uniaxial [001] stress."""
    scale = sigma_zz_gpa / elastic.e_gpa
    return {
        "eps_xx": -elastic.nu * scale,
        "eps_yy": -elastic.nu * scale,
        "eps_zz": scale,
    }


def strain_from_stress(sigma: StressTensor,
                       stiffness: StiffnessConstants = StiffnessConstants(),
                       ) -> StrainTensor:
    """Crystal-frame strain tensor from cubic compliance."""
    c11, c12, c44 = stiffness.c11, stiffness.c12, stiffness.c44
    denominator = (c11 - c12) * (c11 + 2.0 * c12)
    s11 = (c11 + c12) / denominator
    s12 = -c12 / denominator
    normals = np.array([sigma.sigma_xx, sigma.sigma_yy, sigma.sigma_zz])
    eps_normals = s11 * normals + s12 * (normals.sum() - normals)
    return StrainTensor(
        eps_xx=eps_normals[0], eps_yy=eps_normals[1], eps_zz=eps_normals[2],
        eps_yz=sigma.sigma_yz / (2.0 * c44),
        eps_zx=sigma.sigma_zx / (2.0 * c44),
        eps_xy=sigma.sigma_xy / (2.0 * c44),
        frame="crystal",
    )


def rotate_to_nv_frame(strain: StrainTensor) -> StrainTensor:
    """Rotate a crystal-frame strain tensor into the defect frame."""
    if strain.frame != "crystal":
        raise ValidationError(f"expected crystal-frame strain, got {strain.frame!r}")
    rotated = NV_FRAME_ROTATION @ strain.as_matrix() @ NV_FRAME_ROTATION.T
    return StrainTensor.from_matrix(rotated, frame="nv")


def table1_catalog() -> Catalog:
    """Literature coefficient sets with uncertainties and source tags.

    The ``this-work`` stress row constrains only the single- to
    double-quantum ratio ``b_prime/b``; its absolute primed value follows
    once a ``b`` is chosen.
    """
    stress_rows = (
        SusceptibilitySet(
            a1=Uncertain(4.86, 0.02), a2=Uncertain(-3.7, 0.2),
            b=Uncertain(-2.3, 0.3), c=Uncertain(3.5, 0.3),
            source="barson2017"),
        SusceptibilitySet(
            a1=Uncertain(-11.7, 3.2), a2=Uncertain(6.5, 3.2),
            b=Uncertain(7.1, 0.8), c=Uncertain(-5.4, 0.8),
            source="barfuss2019"),
        SusceptibilitySet(
            a1=Uncertain(2.66, 0.07), a2=Uncertain(-2.51, 0.06),
            b=Uncertain(-1.94, 0.02), c=Uncertain(2.83, 0.03),
            b_prime=Uncertain(-0.12, 0.01), c_prime=Uncertain(0.66, 0.01),
            source="udvarhelyi2018"),
        SusceptibilitySet(
            b_prime_over_b=Uncertain(_SQRT2 * 0.5, _SQRT2 * 0.2),
            source="this-work"),
    )
    strain_rows = (
        StrainSusceptibilitySet(
            lambda_a1=Uncertain(-0.5, 8.6), lambda_a2=Uncertain(-9.2, 5.7),
            lambda_b=Uncertain(-0.5, 1.2), lambda_c=Uncertain(14.0, 1.3),
            source="barfuss2019"),
        StrainSusceptibilitySet(
            lambda_a1=Uncertain(2.3, 0.2), lambda_a2=Uncertain(-6.42, 0.09),
            lambda_b=Uncertain(-1.425, 0.050), lambda_c=Uncertain(4.915, 0.022),
            lambda_b_prime=Uncertain(0.65, 0.02),
            lambda_c_prime=Uncertain(-0.707, 0.018),
            source="udvarhelyi2018"),
    )
    legacy_rows = (
        LegacyStrainCoupling(d_parallel=Uncertain(5.46, 0.31),
                             d_perp=Uncertain(19.63, 0.40),
                             source="teissier2014"),
        LegacyStrainCoupling(d_parallel=Uncertain(13.3, 1.1),
                             d_perp=Uncertain(21.5, 1.2),
                             source="ovartchaiyapong2014"),
    )
    return Catalog(stress_rows=stress_rows, strain_rows=strain_rows,
                   legacy_rows=legacy_rows)
