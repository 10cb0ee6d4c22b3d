"""Open-system time evolution of the three-level density matrix.

The model is a Lindblad master equation with pure dephasing: one projector
jump operator per level, all with the same rate 1/T2, and no relaxation
channels.  Populations are therefore conserved by the dissipator while
every coherence decays at 1/T2.

Two integration routes are provided.  ``expm`` propagates the vectorized
density matrix with the exponential of the 9x9 Liouvillian (exact for a
time-independent Hamiltonian, and the fast path used by spectrogram
assembly).  ``rk4`` is a deterministic fixed-step fourth-order scheme that
also handles time-dependent Hamiltonians; the two routes cross-check each
other in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

from .errors import EvolutionError, ValidationError

#: Index of the m_s = 0 level in the {|+1>, |0>, |-1>} basis.
GROUND_INDEX = 1

#: Longest supported evolution time (us); the model is validated only on
#: short timescales where relaxation is negligible.
MAX_TAU_US = 4.0

TRACE_TOL = 1e-9
HERM_TOL = 1e-10
PSD_TOL = 1e-9

HamiltonianLike = Union[np.ndarray, Callable[[float], np.ndarray]]


@dataclass(frozen=True)
class DecoherenceParams:
    """Pure-dephasing rates.  ``t2_us = inf`` disables decoherence."""

    t2_us: float = 2.0

    def __post_init__(self):
        if not self.t2_us > 0:
            raise ValidationError("T2 must be positive")

    @property
    def rates_per_us(self) -> np.ndarray:
        """Per-level dephasing rates gamma_ii = 1/T2 (1/us)."""
        if math.isinf(self.t2_us):
            return np.zeros(3)
        return np.full(3, 1.0 / self.t2_us)

    @property
    def gamma_matrix(self) -> np.ndarray:
        """Rate matrix gamma_ij; off-diagonal entries are zero by model."""
        return np.diag(self.rates_per_us)

    @classmethod
    def no_decay(cls) -> "DecoherenceParams":
        return cls(t2_us=math.inf)


@dataclass(frozen=True)
class TimeTrace:
    """Population of the m_s = 0 level sampled on a pulse-duration grid."""

    tau_us: np.ndarray
    population: np.ndarray
    states: np.ndarray | None = None

    def __post_init__(self):
        tau = np.asarray(self.tau_us, dtype=float)
        pop = np.asarray(self.population, dtype=float)
        if tau.ndim != 1 or tau.shape != pop.shape:
            raise ValidationError("tau grid and population must be equal-length 1d arrays")
        if tau.size > 1 and not np.all(np.diff(tau) > 0):
            raise ValidationError("tau grid must be strictly increasing")
        if np.any(pop < -1e-6) or np.any(pop > 1.0 + 1e-6):
            raise ValidationError("population outside [0, 1] beyond tolerance")
        object.__setattr__(self, "tau_us", tau)
        object.__setattr__(self, "population", pop)


def prepare_state(kind: str = "ground", rho: np.ndarray | None = None) -> np.ndarray:
    """Initial density matrix for a measurement sequence.

    ``ground`` models optical spin polarization into |0>, ``minus_one`` the
    ideal adiabatic-passage preparation into |-1>.  ``custom`` validates and
    returns a copy of ``rho``.
    """
    if kind == "ground":
        return np.diag([0.0, 1.0, 0.0]).astype(complex)
    if kind == "minus_one":
        return np.diag([0.0, 0.0, 1.0]).astype(complex)
    if kind == "custom":
        if rho is None:
            raise ValidationError("custom state requires rho")
        rho = np.asarray(rho, dtype=complex)
        validate_density_matrix(rho)
        return rho.copy()
    raise ValidationError(f"unknown state kind {kind!r}")


def validate_density_matrix(rho: np.ndarray, trace_tol: float = TRACE_TOL,
                            herm_tol: float = HERM_TOL,
                            psd_tol: float = PSD_TOL) -> None:
    """Raise ValidationError unless rho is a valid 3x3 density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (3, 3):
        raise ValidationError(f"density matrix must be 3x3, got {rho.shape}")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValidationError(f"trace {np.trace(rho)} deviates from 1")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValidationError("density matrix is not Hermitian")
    eigenvalues = np.linalg.eigvalsh(rho)
    if eigenvalues.min() < -psd_tol:
        raise ValidationError(
            f"density matrix not positive semidefinite (min eig {eigenvalues.min():.3e})")


_DISSIPATOR_CACHE: dict[tuple[float, ...], np.ndarray] = {}


def _dissipator_superop(rates: np.ndarray) -> np.ndarray:
    key = tuple(rates.tolist())
    cached = _DISSIPATOR_CACHE.get(key)
    if cached is None:
        eye = np.eye(3)
        cached = np.zeros((9, 9), dtype=complex)
        for i, rate in enumerate(rates):
            if rate == 0.0:
                continue
            proj = np.zeros((3, 3))
            proj[i, i] = 1.0
            cached += rate * (np.kron(proj, proj)
                              - 0.5 * (np.kron(proj, eye) + np.kron(eye, proj)))
        _DISSIPATOR_CACHE[key] = cached
    return cached


def liouvillian(h_mhz: np.ndarray, dec: DecoherenceParams) -> np.ndarray:
    """9x9 generator acting on the row-major vectorized density matrix.

    d(vec rho)/dt = L vec(rho), with the Hamiltonian in MHz and time in us,
    so the coherent part carries a 2*pi.
    """
    h = np.asarray(h_mhz, dtype=complex)
    eye = np.eye(3)
    gen = -2j * math.pi * (np.kron(h, eye) - np.kron(eye, h.T))
    gen += _dissipator_superop(dec.rates_per_us)
    return gen


class OscillatingDqHamiltonian:
    """Rotating-frame Hamiltonian with the residual double-quantum term.

    The static part carries the two single-quantum couplings; the
    double-quantum coupling cannot be made static in the same frame and is
    kept as an explicit oscillation at the drive frequency.
    """

    def __init__(self, h_static_mhz: np.ndarray, omega_dq_mhz: float,
                 drive_freq_mhz: float):
        self.h_static_mhz = np.asarray(h_static_mhz, dtype=complex)
        self.omega_dq_mhz = float(omega_dq_mhz)
        self.drive_freq_mhz = float(drive_freq_mhz)
        # fastest rate the integrator must resolve
        self.max_rate_mhz = max(2.0 * float(np.linalg.norm(self.h_static_mhz, 2)),
                                self.drive_freq_mhz, self.omega_dq_mhz)

    def __call__(self, t_us: float) -> np.ndarray:
        h = self.h_static_mhz.copy()
        phase = np.exp(-2j * math.pi * self.drive_freq_mhz * t_us)
        h[0, 2] += 0.5 * self.omega_dq_mhz * phase
        h[2, 0] += 0.5 * self.omega_dq_mhz * phase.conjugate()
        return h


def rotating_frame_hamiltonian(e_plus_mhz: float, e_minus_mhz: float,
                               omega_plus_mhz: float, omega_minus_mhz: float,
                               omega_dq_mhz: float, drive_freq_ghz: float,
                               dq_term: str = "drop") -> HamiltonianLike:
    """Hamiltonian in the frame rotating at the drive frequency.

    Both |+1> and |-1> are shifted down by the drive frequency, which makes
    both single-quantum couplings static while the double-quantum coupling
    acquires a residual oscillation at the full drive frequency.  With
    ``dq_term="drop"`` that far-off-resonant residual is discarded
    (secular approximation) and a constant matrix is returned; with
    ``"oscillating"`` a callable retaining it is returned instead.
    """
    f_mhz = drive_freq_ghz * 1e3
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = e_plus_mhz - f_mhz
    h[2, 2] = e_minus_mhz - f_mhz
    h[0, 1] = h[1, 0] = 0.5 * omega_plus_mhz
    h[1, 2] = h[2, 1] = 0.5 * omega_minus_mhz
    if dq_term == "drop":
        return h
    if dq_term == "oscillating":
        return OscillatingDqHamiltonian(h, omega_dq_mhz, f_mhz)
    raise ValidationError(f"unknown dq_term mode {dq_term!r}")


def _check_hermitian(h: np.ndarray, where: str) -> None:
    scale = max(1.0, np.max(np.abs(h)).item())
    if np.max(np.abs(h - h.conj().T)) > 1e-9 * scale:
        raise ValidationError(f"Hamiltonian is not Hermitian ({where})")


def _rk4_step_us(h: HamiltonianLike, tau: np.ndarray,
                 step_us: float | None) -> float:
    if step_us is not None:
        if step_us <= 0:
            raise ValidationError("step_us must be positive")
        return step_us
    if callable(h):
        rate = getattr(h, "max_rate_mhz", None)
        if rate is None:
            samples = [2.0 * np.linalg.norm(h(t), 2) for t in
                       np.linspace(tau[0] if tau.size else 0.0, tau[-1], 7)]
            rate = max(samples)
    else:
        # the eigenvalue spread (fastest coherence frequency) is at most
        # twice the spectral norm
        rate = 2.0 * float(np.linalg.norm(h, 2))
    # 1000 substeps per period of the fastest coherence keeps the positivity
    # error below 1e-9 and the step-halving change in rho_00 below 1e-6
    # over the 4 us window
    return 1.0 / (1000.0 * max(rate, 0.5))


def _integrate_rk4(rho: np.ndarray, h: HamiltonianLike,
                   dec: DecoherenceParams, t0: float, t1: float,
                   step_us: float) -> np.ndarray:
    span = t1 - t0
    if span == 0.0:
        return rho
    n_sub = max(1, math.ceil(span / step_us))
    if span / n_sub < 1e-9:
        raise EvolutionError(
            f"integrator step underflow near tau={t1:.6g} us "
            f"(requested step {span / n_sub:.3g} us)")
    dt = span / n_sub
    rates = dec.rates_per_us
    gamma_sum = 0.5 * (rates[:, None] + rates[None, :])

    h_static = None if callable(h) else np.asarray(h, dtype=complex)

    # projector dephasing in matrix form:
    # D[r]_ij = -0.5*(g_i+g_j)*r_ij + delta_ij*g_i*r_ii
    def rhs(t, r):
        ht = h(t) if h_static is None else h_static
        out = -2j * math.pi * (ht @ r - r @ ht)
        out += -gamma_sum * r + np.diag(rates * r.diagonal())
        return out

    t = t0
    for _ in range(n_sub):
        k1 = rhs(t, rho)
        k2 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k2)
        k4 = rhs(t + dt, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
    return rho


def _min_eigenvalue_hermitian(states: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each Hermitian 3x3 in a stack (trigonometric form)."""
    a00 = states[:, 0, 0].real
    a11 = states[:, 1, 1].real
    a22 = states[:, 2, 2].real
    a01, a02, a12 = states[:, 0, 1], states[:, 0, 2], states[:, 1, 2]
    off = (np.abs(a01) ** 2 + np.abs(a02) ** 2 + np.abs(a12) ** 2)
    q = (a00 + a11 + a22) / 3.0
    d0, d1, d2 = a00 - q, a11 - q, a22 - q
    p = np.sqrt((d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * off) / 6.0)
    scale = np.where(p > 0, p, 1.0)
    det = (d0 * d1 * d2
           - d0 * np.abs(a12) ** 2 - d2 * np.abs(a01) ** 2
           - d1 * np.abs(a02) ** 2
           + 2.0 * (np.conj(a01) * a02 * np.conj(a12)).real)
    ratio = np.clip(det / (2.0 * scale ** 3), -1.0, 1.0)
    angle = np.arccos(ratio) / 3.0
    smallest = q + 2.0 * p * np.cos(angle + 2.0 * math.pi / 3.0)
    return np.where(p > 0, smallest, q)


def _validate_samples(states: np.ndarray, tau: np.ndarray) -> None:
    traces = np.einsum("nii->n", states)
    bad = np.abs(traces - 1.0) > TRACE_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EvolutionError(
            f"trace deviates by {abs(traces[i] - 1):.3e} at tau={tau[i]:.6g} us")
    herm = np.max(np.abs(states - states.conj().transpose(0, 2, 1)), axis=(1, 2))
    if np.any(herm > HERM_TOL):
        i = int(np.argmax(herm > HERM_TOL))
        raise EvolutionError(
            f"hermiticity violated by {herm[i]:.3e} at tau={tau[i]:.6g} us")
    hermitized = 0.5 * (states + states.conj().transpose(0, 2, 1))
    smallest = _min_eigenvalue_hermitian(hermitized)
    # the closed form loses sqrt(eps) accuracy near degenerate eigenvalues,
    # so anything within that band of the tolerance is re-checked exactly
    suspect = np.flatnonzero(smallest < 1e-7)
    if suspect.size:
        smallest[suspect] = np.linalg.eigvalsh(hermitized[suspect]).min(axis=1)
    if smallest.min() < -PSD_TOL:
        i = int(np.argmin(smallest))
        raise EvolutionError(
            f"negative eigenvalue {smallest.min():.3e} at tau={tau[i]:.6g} us")


def _batched_liouvillians(hams: np.ndarray, dec: DecoherenceParams) -> np.ndarray:
    eye = np.eye(3)
    # kron(H, I) and kron(I, H^T) over the stacked axis
    left = np.einsum("nij,kl->nikjl", hams, eye).reshape(-1, 9, 9)
    right = np.einsum("ij,nlk->nikjl", eye, hams).reshape(-1, 9, 9)
    return -2j * math.pi * (left - right) + _dissipator_superop(dec.rates_per_us)


def evolve_many(rho0: np.ndarray, hamiltonians: np.ndarray,
                dec: DecoherenceParams, tau_grid_us: np.ndarray,
                label=None) -> np.ndarray:
    """Evolve one initial state under a stack of constant Hamiltonians.

    ``hamiltonians`` has shape (n, 3, 3); returns the m_s = 0 populations
    with shape (len(tau), n).  Equivalent to n calls of :func:`evolve`
    with the exponential propagator, but the Liouvillians are exponentiated
    in one batch, which is what makes dense parameter scans tractable.
    ``label`` (callable index -> str) names the offending member in errors.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    validate_density_matrix(rho0)
    tau = np.asarray(tau_grid_us, dtype=float)
    if tau.ndim != 1 or tau.size == 0:
        raise ValidationError("tau grid must be a non-empty 1d array")
    if np.any(tau < 0) or (tau.size > 1 and not np.all(np.diff(tau) > 0)):
        raise ValidationError("tau grid must be non-negative and strictly increasing")
    if tau[-1] > MAX_TAU_US + 1e-9:
        raise ValidationError(
            f"tau grid extends to {tau[-1]} us; model validated for <= {MAX_TAU_US} us")
    hams = np.asarray(hamiltonians, dtype=complex)
    if hams.ndim != 3 or hams.shape[1:] != (3, 3):
        raise ValidationError("hamiltonians must have shape (n, 3, 3)")
    herm_dev = np.max(np.abs(hams - hams.conj().transpose(0, 2, 1)))
    if herm_dev > 1e-9 * max(1.0, float(np.max(np.abs(hams)))):
        raise ValidationError("a stacked Hamiltonian is not Hermitian")

    generators = _batched_liouvillians(hams, dec)
    n = hams.shape[0]
    vec = np.broadcast_to(rho0.reshape(9), (n, 9)).copy()
    states = np.empty((tau.size, n, 3, 3), dtype=complex)
    propagators: dict[float, np.ndarray] = {}
    t_prev = 0.0
    for i, t in enumerate(tau):
        dt = t - t_prev
        if dt > 0:
            key = round(dt, 14)
            props = propagators.get(key)
            if props is None:
                props = expm(generators * key)
                propagators[key] = props
            vec = np.einsum("nij,nj->ni", props, vec)
        states[i] = vec.reshape(n, 3, 3)
        t_prev = t

    try:
        _validate_samples(states.reshape(-1, 3, 3),
                          np.repeat(tau, n))
    except EvolutionError as exc:
        raise EvolutionError(
            f"{exc}{'' if label is None else f' ({label})'}") from None
    return states[:, :, GROUND_INDEX, GROUND_INDEX].real


def evolve(rho0: np.ndarray, hamiltonian: HamiltonianLike,
           dec: DecoherenceParams, tau_grid_us: np.ndarray,
           method: str = "auto", step_us: float | None = None,
           keep_states: bool = False) -> TimeTrace:
    """Evolve ``rho0`` and sample the m_s = 0 population on ``tau_grid_us``.

    ``hamiltonian`` is either a constant 3x3 matrix in MHz or a callable
    ``t_us -> matrix``.  ``method`` is ``"expm"`` (Liouvillian exponential,
    constant Hamiltonians only), ``"rk4"`` (fixed-step), or ``"auto"``
    which picks ``expm`` for constant matrices.  Density-matrix invariants
    are verified at every output sample and violations raise
    :class:`EvolutionError` naming the offending time.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    validate_density_matrix(rho0)
    tau = np.asarray(tau_grid_us, dtype=float)
    if tau.ndim != 1 or tau.size == 0:
        raise ValidationError("tau grid must be a non-empty 1d array")
    if np.any(tau < 0):
        raise ValidationError("tau grid must be non-negative")
    if tau.size > 1 and not np.all(np.diff(tau) > 0):
        raise ValidationError("tau grid must be strictly increasing")
    if tau[-1] > MAX_TAU_US + 1e-9:
        raise ValidationError(
            f"tau grid extends to {tau[-1]} us; model validated for <= {MAX_TAU_US} us")

    constant = not callable(hamiltonian)
    if constant:
        hamiltonian = np.asarray(hamiltonian, dtype=complex)
        if hamiltonian.shape != (3, 3):
            raise ValidationError("Hamiltonian must be 3x3")
        _check_hermitian(hamiltonian, "constant input")
    else:
        _check_hermitian(np.asarray(hamiltonian(tau[0]), dtype=complex), "t=tau[0]")

    if method == "auto":
        method = "expm" if constant else "rk4"
    if method == "expm" and not constant:
        raise ValidationError("expm method requires a time-independent Hamiltonian")
    if method not in ("expm", "rk4"):
        raise ValidationError(f"unknown method {method!r}")

    states = np.empty((tau.size, 3, 3), dtype=complex)
    if method == "expm":
        gen = liouvillian(hamiltonian, dec)
        vec = rho0.reshape(9)
        propagators: dict[float, np.ndarray] = {}
        t_prev = 0.0
        for i, t in enumerate(tau):
            dt = t - t_prev
            if dt > 0:
                # quantize the gap so uniform grids reuse one propagator
                key = round(dt, 14)
                prop = propagators.get(key)
                if prop is None:
                    prop = expm(gen * key)
                    propagators[key] = prop
                vec = prop @ vec
            states[i] = vec.reshape(3, 3)
            t_prev = t
    else:
        step = _rk4_step_us(hamiltonian, tau, step_us)
        rho = rho0.copy()
        t_prev = 0.0
        for i, t in enumerate(tau):
            rho = _integrate_rk4(rho, hamiltonian, dec, t_prev, t, step)
            states[i] = rho
            t_prev = t

    _validate_samples(states, tau)
    population = states[:, GROUND_INDEX, GROUND_INDEX].real
    return TimeTrace(tau_us=tau, population=population,
                     states=states if keep_states else None)
