"""Reference device configurations for the two supported acoustic modes.

The equivalent-circuit parameter sets are the characterized values of the
3 GHz bulk acoustic resonator this toolkit targets; they double as truth
sets for synthetic-data round trips.  Fit and simulation windows are
derived from each parameter set (center at its closed-form resonance,
half-width a fixed number of linewidths), not from the nominal mode label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import MbvdParams
from .errors import ValidationError


@dataclass(frozen=True)
class ModePreset:
    name: str
    transition: str           # 'plus' drives |0><->|+1>, 'minus' |0><->|-1>
    wavelength_um: float
    circuit: MbvdParams
    beta: float = 1.3

    def freq_window_ghz(self, n_points: int = 41,
                        half_width_linewidths: float = 10.0) -> np.ndarray:
        """Frequency grid centered on the circuit resonance."""
        f_r = self.circuit.resonance_ghz
        q = (2.0 * np.pi * f_r * 1e9 * self.circuit.lm_uh * 1e-6
             / self.circuit.rm_ohm)
        half = half_width_linewidths * f_r / q
        return np.linspace(f_r - half, f_r + half, n_points)


MODES: dict[str, ModePreset] = {
    "3.132GHz": ModePreset(
        name="3.132GHz",
        transition="plus",
        wavelength_um=5.7,
        circuit=MbvdParams(a_mhz_per_s=235.0, b_khz_per_v=2.6, rm_ohm=219.0,
                           lm_uh=13.0, cm_ff=0.20, r0_ohm=46.0, c0_pf=0.20,
                           rs_ohm=98.0),
    ),
    "2.732GHz": ModePreset(
        name="2.732GHz",
        transition="minus",
        wavelength_um=6.7,
        circuit=MbvdParams(a_mhz_per_s=624.0, b_khz_per_v=4.9, rm_ohm=69.0,
                           lm_uh=10.0, cm_ff=0.33, r0_ohm=149.0, c0_pf=0.13,
                           rs_ohm=732.0),
    ),
}


def get_mode(name: str) -> ModePreset:
    try:
        return MODES[name]
    except KeyError:
        raise ValidationError(
            f"unknown mode {name!r}; available: {sorted(MODES)}") from None
