"""Su-Schrieffer-Heeger chain: bands, winding, bulk dynamics and the spreading
coefficient.

Momenta are shifted by pi relative to the usual cell Fourier transform, so

    H(k) = [t - t' cos k] sigma_x - t' sin k sigma_y,   E^2 = t^2 + t'^2 - 2 t t' cos k

and the gap closes at k = 0 when t = t'. The shift multiplies real-space
amplitudes by (-1)^m, which leaves every probability unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numerics import bz_grid, periodic_mean, planar_winding
from .bands import (
    DEGENERATE_TOL, SIGMA, SpreadingCoefficient, WindingResult, build_residue_report,
)
from .errors import GapClosedError, ValidationError
from .walk import CoinState, ProbabilityDistribution, coin_expectations

SUBLATTICE_A = CoinState(1.0, 0.0)


@dataclass(frozen=True)
class SSHParams:
    """Intra-cell hopping ``t`` and inter-cell hopping ``t_prime`` (lattice constant 1)."""

    t: float
    t_prime: float

    def __post_init__(self):
        t, tp = float(self.t), float(self.t_prime)
        if not (math.isfinite(t) and math.isfinite(tp)):
            raise ValidationError("hoppings must be finite")
        if t < 0 or tp < 0:
            raise ValidationError(f"hoppings must be non-negative, got t={t!r}, t'={tp!r}")
        if t == 0 and tp == 0:
            raise ValidationError("t and t' cannot both vanish")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "t_prime", tp)

    @property
    def topological(self) -> bool:
        return self.t_prime > self.t

    def near_transition(self, rel: float = 1e-6) -> bool:
        return abs(self.t - self.t_prime) <= rel * max(self.t, self.t_prime)


@dataclass(frozen=True)
class SSHBandPoint:
    k: float
    E: float
    V: float
    n: tuple[float, float, float]


@dataclass(frozen=True)
class SSHEvolutionConfig:
    """Bulk evolution of an electron started in cell 0 with sublattice spinor ``chi0``.

    ``cells`` is the size of the periodic momentum grid; it must exceed the
    light cone ``4 ceil(max(t, t') tau) + 16`` so that the wavefunction cannot
    wrap around.
    """

    params: SSHParams
    tau: float
    cells: int
    chi0: CoinState = SUBLATTICE_A

    def __post_init__(self):
        if not math.isfinite(self.tau) or self.tau < 0:
            raise ValidationError(f"tau must be a non-negative number, got {self.tau!r}")
        if not isinstance(self.chi0, CoinState):
            object.__setattr__(self, "chi0", CoinState(*self.chi0))
        need = min_cells(self.params, self.tau)
        if self.cells < need:
            raise ValidationError(
                f"cells={self.cells} is below the anti-aliasing bound {need} for tau={self.tau}")

    @classmethod
    def auto(cls, params: SSHParams, tau: float, chi0: CoinState = SUBLATTICE_A) -> "SSHEvolutionConfig":
        """Smallest power-of-two grid above the anti-aliasing bound."""
        need = min_cells(params, tau)
        return cls(params, tau, 1 << (need - 1).bit_length(), chi0)


def min_cells(params: SSHParams, tau: float) -> int:
    return 4 * math.ceil(max(params.t, params.t_prime) * tau) + 16


# --------------------------------------------------------------------------
# bands
# --------------------------------------------------------------------------

def ssh_bloch_hamiltonian(params: SSHParams, k):
    """2x2 Bloch Hamiltonian(s); shape ``(2, 2)`` for scalar ``k``, else ``(len(k), 2, 2)``."""
    scalar = np.ndim(k) == 0
    ks = np.atleast_1d(np.asarray(k, dtype=np.float64))
    hx = params.t - params.t_prime * np.cos(ks)
    hy = -params.t_prime * np.sin(ks)
    h = hx[:, None, None] * SIGMA[0] + hy[:, None, None] * SIGMA[1]
    return h[0] if scalar else h


def ssh_energy(params: SSHParams, k):
    """Upper-band energy ``sqrt(t^2 + t'^2 - 2 t t' cos k)``, evaluated as
    ``sqrt((t - t')^2 + 4 t t' sin^2(k/2))``."""
    k = np.asarray(k, dtype=np.float64)
    t, tp = params.t, params.t_prime
    e = np.sqrt((t - tp) ** 2 + 4.0 * t * tp * np.sin(0.5 * k) ** 2)
    return float(e) if e.ndim == 0 else e


def ssh_group_velocity(params: SSHParams, k, band: int = -1):
    """``dE/dk`` of the lower (default) or upper band; NaN where the gap closes.

    With the lower band the velocity equals ``t * n_y``.
    """
    scalar = np.ndim(k) == 0
    e = np.asarray(ssh_energy(params, k))
    closed = e < DEGENERATE_TOL
    if scalar and closed:
        raise GapClosedError(f"SSH gap closed at k={float(k)!r}")
    v = np.where(closed, np.nan,
                 band * params.t * params.t_prime * np.sin(k) / np.where(closed, 1.0, e))
    return float(v) if scalar else v


def ssh_bloch_vector(params: SSHParams, k):
    """``n(k) = (t - t' cos k, -t' sin k, 0) / E``; NaN rows where ``E < 1e-9``."""
    k = np.asarray(k, dtype=np.float64)
    e = np.asarray(ssh_energy(params, k))
    closed = e < DEGENERATE_TOL
    safe = np.where(closed, 1.0, e)
    nx = (params.t - params.t_prime * np.cos(k)) / safe
    ny = -params.t_prime * np.sin(k) / safe
    n = np.stack(np.broadcast_arrays(nx, ny, np.zeros_like(nx)), axis=-1)
    return np.where(closed[..., None], np.nan, n)


def ssh_band(params: SSHParams, k: float, band: int = -1) -> SSHBandPoint:
    e = ssh_energy(params, k)
    if e < DEGENERATE_TOL:
        raise GapClosedError(f"SSH gap closed at k={k!r}")
    n = tuple(float(x) for x in ssh_bloch_vector(params, k))
    return SSHBandPoint(float(k), band * e, ssh_group_velocity(params, k, band), n)


def ssh_winding(params: SSHParams, grid: int = 1024) -> WindingResult:
    if grid < 64:
        raise ValidationError(f"winding grid must have at least 64 points, got {grid}")
    if params.near_transition():
        raise GapClosedError("winding undefined at transition (t = t')")

    def xy(ks):
        hx = params.t - params.t_prime * np.cos(ks)
        hy = -params.t_prime * np.sin(ks)
        return hx, hy

    total, arc = planar_winding(xy, grid)
    turns = total / (2.0 * math.pi)
    w = int(round(turns))
    n = ssh_bloch_vector(params, bz_grid(grid))
    return WindingResult(w, np.array([0.0, 0.0, 1.0]), arc, abs(turns - w),
                         float(np.max(np.abs(n[:, 2]))))


# --------------------------------------------------------------------------
# dynamics
# --------------------------------------------------------------------------

def _evolve_amplitudes(config: SSHEvolutionConfig, tau: float):
    params = config.params
    n_cells = config.cells
    ks = 2.0 * math.pi * np.arange(n_cells) / n_cells
    hx = params.t - params.t_prime * np.cos(ks)
    hy = -params.t_prime * np.sin(ks)
    e = np.sqrt((params.t - params.t_prime) ** 2 + 4.0 * params.t * params.t_prime * np.sin(0.5 * ks) ** 2)
    safe = np.where(e > 0.0, e, 1.0)
    nx = np.where(e > 0.0, hx / safe, 0.0)
    ny = np.where(e > 0.0, hy / safe, 0.0)
    cos_t = np.cos(e * tau)
    sin_t = np.sin(e * tau)
    a0, b0 = config.chi0.alpha, config.chi0.beta
    # exp(-i H tau) = cos(E tau) - i sin(E tau) (n . sigma),  n_z = 0
    psi_a = cos_t * a0 - 1j * sin_t * (nx - 1j * ny) * b0
    psi_b = cos_t * b0 - 1j * sin_t * (nx + 1j * ny) * a0
    # cell amplitudes psi(m) = (1/N) sum_k e^{ikm} psi(k); index N + m holds m < 0
    return np.fft.ifft(psi_a), np.fft.ifft(psi_b)


def ssh_evolve(config: SSHEvolutionConfig) -> ProbabilityDistribution:
    """Cell-resolved distribution ``P(m) = |psi_A(m)|^2 + |psi_B(m)|^2`` at time tau."""
    if config.tau == 0 or config.params.t_prime == 0:
        # no inter-cell hopping (or no time): the electron stays in cell 0
        return ProbabilityDistribution(0, np.ones(1))
    amp_a, amp_b = _evolve_amplitudes(config, config.tau)
    probs = np.abs(amp_a) ** 2 + np.abs(amp_b) ** 2
    half = config.cells // 2
    return ProbabilityDistribution(-half, np.fft.fftshift(probs))


def ssh_moment_series(params: SSHParams, taus, chi0: CoinState = SUBLATTICE_A) -> np.ndarray:
    """``M2(tau)/tau^2`` at each positive time in ``taus`` (one grid sized for the largest)."""
    taus = np.asarray(taus, dtype=np.float64)
    if np.any(taus <= 0):
        raise ValidationError("times must be positive")
    config = SSHEvolutionConfig.auto(params, float(taus.max()), chi0)
    out = np.empty(taus.size)
    m = np.fft.fftfreq(config.cells, 1.0 / config.cells)
    for i, tau in enumerate(taus):
        a, b = _evolve_amplitudes(config, tau)
        p = np.abs(a) ** 2 + np.abs(b) ** 2
        out[i] = float(np.dot(m * m, p)) / tau ** 2
    return out


def ssh_asymptotic_moments(params: SSHParams, chi0: CoinState = SUBLATTICE_A):
    """``(M1/tau, M2/tau^2, M2/(tau^2 t^2))`` in the long-time limit.

    ``M1/tau -> -s_2 L`` with ``s_2 = <chi0|sigma_y|chi0>``; ``M2/tau^2 -> L``.
    """
    _, s_2, _ = coin_expectations(chi0)
    big_l = ssh_L(params, "closed_form").L
    scaled = big_l / params.t ** 2 if params.t > 0 else math.nan
    return -s_2 * big_l, big_l, scaled


# --------------------------------------------------------------------------
# spreading coefficient
# --------------------------------------------------------------------------

def ssh_residue_integrand(z, params: SSHParams):
    z = np.asarray(z, dtype=np.complex128)
    t, tp = params.t, params.t_prime
    pref = -1j * t * tp / (8.0 * math.pi)
    return pref * (z * z - 1) ** 2 / (z * z * (z * z - z * (t * t + tp * tp) / (t * tp) + 1))


def ssh_residue_oracle(params: SSHParams, radius: float = 1e-3, points: int = 64):
    """Poles ``0`` (double), ``t/t'``, ``t'/t`` and their residues, each checked by contour."""
    t, tp = params.t, params.t_prime
    if t == 0 or tp == 0:
        raise ValidationError("residue method needs t > 0 and t' > 0")
    if params.near_transition():
        raise ValidationError("poles on integration path (t = t'); residue sum undefined")
    poles = np.array([0.0, t / tp, tp / t], dtype=np.complex128)
    values = np.array([(t * t + tp * tp) / 4, (t * t - tp * tp) / 4, (tp * tp - t * t) / 4],
                      dtype=np.complex128)
    report = build_residue_report(lambda z: ssh_residue_integrand(z, params), poles, values,
                                  radius, points)
    if report.max_residue_error > 1e-8:
        raise ArithmeticError(
            f"tabulated residues disagree with contour integrals by {report.max_residue_error:.3e}")
    return report


def ssh_L(params: SSHParams, method: str = "closed_form", grid: int = 4096) -> SpreadingCoefficient:
    """Zone average of the squared group velocity, by the chosen method."""
    if method == "closed_form":
        t, tp = params.t, params.t_prime
        return SpreadingCoefficient(0.5 * (tp * tp if tp < t else t * t), method)
    if method == "quadrature":
        if grid < 256:
            raise ValidationError(f"quadrature grid must have at least 256 points, got {grid}")
        v = ssh_group_velocity(params, bz_grid(grid))
        return SpreadingCoefficient(periodic_mean(v * v), method)
    if method == "residue":
        return SpreadingCoefficient(ssh_residue_oracle(params).total, method)
    raise ValidationError(f"method must be one of {SpreadingCoefficient.METHODS}, got {method!r}")


def ssh_bdi_residuals(params: SSHParams, ks) -> tuple[float, float]:
    """Max deviation from chiral (sigma_z H sigma_z = -H) and time-reversal
    (H(k)* = H(-k)) symmetry over ``ks``."""
    ks = np.asarray(ks, dtype=np.float64)
    h = ssh_bloch_hamiltonian(params, ks)
    chiral = SIGMA[2] @ h @ SIGMA[2] + h
    trs = np.conj(h) - ssh_bloch_hamiltonian(params, -ks)
    return float(np.max(np.abs(chiral))), float(np.max(np.abs(trs)))
