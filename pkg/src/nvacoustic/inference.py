"""Image-similarity scoring and susceptibility-ratio inference.

A measured spectrogram is compared against simulations over a grid of
candidate drive-composition parameters (alpha, phi) using the structural
similarity index; the grid peak gives the best-matching parameters and
half-width-at-half-maximum line cuts through the peak provide pragmatic
uncertainties (there is no formally defined uncertainty measure for SSIM
scores, so the HWHM convention is a documented choice, not a statistical
guarantee).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from . import spin
from .circuit import MbvdParams
from .errors import ValidationError
from .spectro import EnsembleSpec, RabiSpectrogram, simulate_spectrogram
from .util import parallel_map


@dataclass(frozen=True)
class SsimConfig:
    """Structural-similarity constants and windowing mode.

    ``c1 = (0.01*L)**2`` and ``c2 = 9*c1`` so c1 = c2/9 holds exactly.
    ``window="global"`` computes one score from whole-image statistics;
    ``"gaussian"`` averages a local map computed with a Gaussian window.
    """

    dynamic_range: float = 255.0
    window: str = "global"
    window_size: int = 11
    window_sigma: float = 1.5

    def __post_init__(self):
        if self.dynamic_range <= 0:
            raise ValidationError("dynamic range must be positive")
        if self.window not in ("global", "gaussian"):
            raise ValidationError(f"unknown SSIM window mode {self.window!r}")
        if self.window_size < 2 or self.window_size % 2 == 0:
            raise ValidationError("window size must be an odd integer >= 3")

    @property
    def c1(self) -> float:
        return (0.01 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return 9.0 * self.c1


def rescale_to_dynamic_range(image: np.ndarray,
                             dynamic_range: float = 255.0) -> np.ndarray:
    """Min-max rescale an image to [0, L]; a constant image maps to zeros."""
    image = np.asarray(image, dtype=float)
    low = image.min()
    span = image.max() - low
    if span <= 0:
        return np.zeros_like(image)
    return (image - low) * (dynamic_range / span)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    kernel = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2)
                    / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def ssim(x: np.ndarray, y: np.ndarray, cfg: SsimConfig = SsimConfig()) -> float:
    """Structural similarity index of two equal-sized images in [0, L].

    Evaluates
    ``(2*mu_x*mu_y + C1)*(2*cov_xy + C2) / ((mu_x^2 + mu_y^2 + C1)*(var_x + var_y + C2))``
    either once over the full image or per Gaussian window followed by a
    mean pool.  Identical images score exactly 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValidationError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim != 2:
        raise ValidationError("images must be 2d arrays")
    c1, c2 = cfg.c1, cfg.c2

    if cfg.window == "global":
        mu_x, mu_y = x.mean(), y.mean()
        var_x = np.mean((x - mu_x) ** 2)
        var_y = np.mean((y - mu_y) ** 2)
        cov = np.mean((x - mu_x) * (y - mu_y))
        return float((2 * mu_x * mu_y + c1) * (2 * cov + c2)
                     / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)))

    if min(x.shape) < cfg.window_size:
        raise ValidationError(
            f"image {x.shape} smaller than the {cfg.window_size}x{cfg.window_size} window; "
            "use the global mode")
    kernel = _gaussian_kernel(cfg.window_size, cfg.window_sigma)
    mu_x = convolve2d(x, kernel, mode="valid")
    mu_y = convolve2d(y, kernel, mode="valid")
    var_x = convolve2d(x * x, kernel, mode="valid") - mu_x ** 2
    var_y = convolve2d(y * y, kernel, mode="valid") - mu_y ** 2
    cov = convolve2d(x * y, kernel, mode="valid") - mu_x * mu_y
    score_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)
                 / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)))
    return float(score_map.mean())


@dataclass(frozen=True)
class ScanPeak:
    alpha: float
    phi_deg: float
    ssim: float


@dataclass(frozen=True)
class ScanUncertainty:
    d_alpha: float
    d_phi_deg: float
    alpha_one_sided: bool = False
    phi_one_sided: bool = False


@dataclass(frozen=True)
class Refinement:
    alpha_grid: np.ndarray
    phi_grid_deg: np.ndarray
    ssim_map: np.ndarray


@dataclass(frozen=True)
class ScanResult:
    alpha_grid: np.ndarray
    phi_grid_deg: np.ndarray
    ssim_map: np.ndarray
    peak: ScanPeak
    uncertainty: ScanUncertainty
    failures: tuple[tuple[int, int, str], ...] = ()
    refinement: Refinement | None = None

    @property
    def n_cells(self) -> int:
        return int(self.ssim_map.size)


def _evaluate_cells(cells, data_image, circuit, ensemble, transition, beta,
                    freq_ghz, tau_us, cfg, dec, dq_term, n_workers):
    args = [(alpha, phi_deg, data_image, circuit, ensemble, transition, beta,
             freq_ghz, tau_us, cfg, dec, dq_term) for alpha, phi_deg in cells]
    return parallel_map(_scan_cell, args, n_workers)


def _scan_cell(args):
    (alpha, phi_deg, data_image, circuit, ensemble, transition, beta,
     freq_ghz, tau_us, cfg, dec, dq_term) = args
    try:
        ratios = spin.CouplingRatios(alpha=alpha, beta=beta,
                                     phi_rad=math.radians(phi_deg))
        sim = simulate_spectrogram(circuit, ratios, ensemble, transition,
                                   freq_ghz, tau_us, dec=dec, dq_term=dq_term)
        sim_image = rescale_to_dynamic_range(sim.signal, cfg.dynamic_range)
        return ssim(data_image, sim_image, cfg), None
    except Exception as exc:  # per-cell failures are reported, not fatal
        return math.nan, f"{type(exc).__name__}: {exc}"


def _half_widths(axis: np.ndarray, values: np.ndarray,
                 i_peak: int) -> tuple[float | None, float | None]:
    """Distances from the peak to the half-maximum crossing on each side.

    The cut is min-max normalized first; crossings are located by linear
    interpolation.  A side without a crossing returns None.
    """
    finite = np.isfinite(values)
    if finite.sum() < 3:
        return None, None
    v = values.copy()
    v[~finite] = np.nanmin(values)
    span = v.max() - v.min()
    if span <= 0:
        return None, None
    norm = (v - v.min()) / span
    half = 0.5
    x_peak = axis[i_peak]

    left = None
    for i in range(i_peak, 0, -1):
        if norm[i - 1] < half <= norm[i]:
            frac = (norm[i] - half) / (norm[i] - norm[i - 1])
            left = x_peak - (axis[i] - frac * (axis[i] - axis[i - 1]))
            break
    right = None
    for i in range(i_peak, axis.size - 1):
        if norm[i + 1] < half <= norm[i]:
            frac = (norm[i] - half) / (norm[i] - norm[i + 1])
            right = (axis[i] + frac * (axis[i + 1] - axis[i])) - x_peak
            break
    return left, right


def _hwhm(axis: np.ndarray, values: np.ndarray,
          i_peak: int) -> tuple[float, bool]:
    left, right = _half_widths(axis, values, i_peak)
    if left is None and right is None:
        # no crossing at all: report the full half-range as a conservative width
        return float(max(axis[i_peak] - axis[0], axis[-1] - axis[i_peak])), True
    if left is None:
        return float(right), True
    if right is None:
        return float(left), True
    return float(0.5 * (left + right)), False


def scan(data: RabiSpectrogram, circuit: MbvdParams, ensemble: EnsembleSpec,
         transition: str, beta: float = 1.3,
         alpha_range: tuple[float, float] = (0.0, 1.5),
         phi_range_deg: tuple[float, float] = (-180.0, 180.0),
         n_alpha: int = 31, n_phi: int = 37,
         cfg: SsimConfig = SsimConfig(),
         dec=None, dq_term: str = "drop", refine: bool = True,
         n_workers: int = 1) -> ScanResult:
    """Grid-search (alpha, phi) by structural similarity against ``data``.

    One spectrogram is simulated per grid point on the data's own grids and
    scored against the (column-normalized) data after both images are
    rescaled to the configured dynamic range.  Cells whose simulation fails
    are excluded from the peak search and reported in ``failures``.  With
    ``refine=True`` a half-spacing local grid around the coarse peak is
    scanned as well and the best cell over both grids reported as the peak.

    HWHM uncertainties come from the normalized line cuts through the
    coarse peak; one-sided peaks are flagged.
    """
    if n_alpha < 2 or n_phi < 2:
        raise ValidationError(
            "scan grids need at least 2 points per axis to estimate HWHM uncertainties")
    low, high = data.signal.min(), data.signal.max()
    if low < -0.2 or high > 1.2:
        raise ValidationError(
            f"data range [{low:.3g}, {high:.3g}] looks unnormalized; "
            "column-normalize the spectrogram first")

    alpha_grid = np.linspace(alpha_range[0], alpha_range[1], n_alpha)
    phi_grid = np.linspace(phi_range_deg[0], phi_range_deg[1], n_phi)
    data_image = rescale_to_dynamic_range(data.signal, cfg.dynamic_range)

    cells = [(float(a), float(p)) for a in alpha_grid for p in phi_grid]
    outcomes = _evaluate_cells(cells, data_image, circuit, ensemble,
                               transition, beta, data.freq_ghz, data.tau_us,
                               cfg, dec, dq_term, n_workers)
    ssim_map = np.full((n_alpha, n_phi), np.nan)
    failures = []
    for (i, j), (score, error) in zip(
            ((i, j) for i in range(n_alpha) for j in range(n_phi)), outcomes):
        ssim_map[i, j] = score
        if error is not None:
            failures.append((i, j, error))

    if not np.any(np.isfinite(ssim_map)):
        raise ValidationError("all scan cells failed; nothing to report")
    flat_peak = np.nanargmax(ssim_map)
    i_peak, j_peak = np.unravel_index(flat_peak, ssim_map.shape)
    peak = ScanPeak(alpha=float(alpha_grid[i_peak]),
                    phi_deg=float(phi_grid[j_peak]),
                    ssim=float(ssim_map[i_peak, j_peak]))

    d_alpha, alpha_one_sided = _hwhm(alpha_grid, ssim_map[:, j_peak], int(i_peak))
    d_phi, phi_one_sided = _hwhm(phi_grid, ssim_map[i_peak, :], int(j_peak))
    uncertainty = ScanUncertainty(d_alpha=d_alpha, d_phi_deg=d_phi,
                                  alpha_one_sided=alpha_one_sided,
                                  phi_one_sided=phi_one_sided)

    refinement = None
    if refine:
        da = alpha_grid[1] - alpha_grid[0]
        dp = phi_grid[1] - phi_grid[0]
        fine_alpha = np.unique(np.clip(
            peak.alpha + 0.5 * da * np.arange(-4, 5), alpha_range[0], alpha_range[1]))
        fine_phi = np.unique(np.clip(
            peak.phi_deg + 0.5 * dp * np.arange(-4, 5),
            phi_range_deg[0], phi_range_deg[1]))
        fine_cells = [(float(a), float(p)) for a in fine_alpha for p in fine_phi]
        fine_outcomes = _evaluate_cells(fine_cells, data_image, circuit,
                                        ensemble, transition, beta,
                                        data.freq_ghz, data.tau_us, cfg, dec,
                                        dq_term, n_workers)
        fine_map = np.array([score for score, _ in fine_outcomes]).reshape(
            fine_alpha.size, fine_phi.size)
        refinement = Refinement(alpha_grid=fine_alpha, phi_grid_deg=fine_phi,
                                ssim_map=fine_map)
        if np.any(np.isfinite(fine_map)):
            k = np.nanargmax(fine_map)
            ik, jk = np.unravel_index(k, fine_map.shape)
            if fine_map[ik, jk] > peak.ssim:
                peak = ScanPeak(alpha=float(fine_alpha[ik]),
                                phi_deg=float(fine_phi[jk]),
                                ssim=float(fine_map[ik, jk]))

    return ScanResult(alpha_grid=alpha_grid, phi_grid_deg=phi_grid,
                      ssim_map=ssim_map, peak=peak, uncertainty=uncertainty,
                      failures=tuple(failures), refinement=refinement)


@dataclass(frozen=True)
class BPrimeResult:
    b_prime_mhz_per_gpa: float
    uncertainty_mhz_per_gpa: float
    ratio_text: str


def extract_bprime(alpha: float, b_mhz_per_gpa: float, d_alpha: float = 0.0,
                   d_b: float = 0.0) -> BPrimeResult:
    """Single-quantum stress susceptibility from the fitted field ratio.

    ``b_prime = sqrt(2) * alpha * b`` with the relative uncertainties of
    alpha and b combined in quadrature.
    """
    if b_mhz_per_gpa == 0:
        raise ValidationError("b must be nonzero")
    if alpha < 0 or d_alpha < 0 or d_b < 0:
        raise ValidationError("alpha and uncertainties must be non-negative")
    b_prime = math.sqrt(2.0) * alpha * b_mhz_per_gpa
    if alpha > 0:
        rel = math.hypot(d_alpha / alpha, d_b / abs(b_mhz_per_gpa))
        uncertainty = abs(b_prime) * rel
    else:
        uncertainty = math.sqrt(2.0) * d_alpha * abs(b_mhz_per_gpa)
    ratio_text = (f"b' = sqrt(2) x ({alpha:.2f} +/- {d_alpha:.2f}) x b"
                  f" = {b_prime:.3f} +/- {uncertainty:.3f} MHz/GPa"
                  f" (b = {b_mhz_per_gpa:.3f} +/- {d_b:.3f} MHz/GPa)")
    return BPrimeResult(b_prime_mhz_per_gpa=b_prime,
                        uncertainty_mhz_per_gpa=uncertainty,
                        ratio_text=ratio_text)
