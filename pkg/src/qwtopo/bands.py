"""Bloch bands of the walk: quasi-energy, group velocity, Bloch vector,
winding number and the spreading coefficient L(delta).

Momentum convention: |k> = sum_m e^{imk} |m>, so a shift m -> m + s acts on
|k> as the phase e^{-isk}.

Band formulas (``quasi_energy``, ``bloch_vector``, ...) are written for the
q = 1/2 walk in the canonical gauge ``cos E = [cos(delta/2) + sin(delta/2) cos k]/sqrt 2``.
The operator returned by :func:`bloch_operator` realizes the same bands with
``k -> -k``; :func:`detect_k_offset` finds that map numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from ._numerics import bz_grid, circle_residue, periodic_mean, planar_winding
from .errors import GapClosedError, ValidationError
from .walk import QWP_MATRIX, TWO_PI, CoinState, StepParams, coin_expectations

SQRT2 = math.sqrt(2.0)
TRANSITIONS = (0.5 * math.pi, 1.5 * math.pi)
PLATEAU = 1.0 - 1.0 / SQRT2
MAX_SPEED = 1.0 / SQRT2
DEGENERATE_TOL = 1e-9
GAPLESS_GUARD = 1e-6
CHIRAL_AXIS = np.array([0.0, 1.0, 1.0]) / SQRT2

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=np.complex128)

# rotation by pi/4 about x: takes CHIRAL_AXIS to +z
ROT_X = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0 / SQRT2, -1.0 / SQRT2],
    [0.0, 1.0 / SQRT2, 1.0 / SQRT2],
])


@dataclass(frozen=True, eq=False)
class BlochMatrix:
    k: float
    entries: np.ndarray


@dataclass(frozen=True, eq=False)
class BlochDecomposition:
    """``e^{i phase} U = cos E I - i sin E (n . sigma)`` with E in [0, pi]."""

    E: float
    n: np.ndarray | None
    phase: float
    degenerate: bool


@dataclass(frozen=True)
class BandPoint:
    k: float
    E: float
    V: float
    n: tuple[float, float, float]
    Nfactor: float


class BlochVector(NamedTuple):
    n: np.ndarray          # (..., 3); NaN where degenerate
    norm: np.ndarray       # N(k)
    degenerate: np.ndarray  # bool mask, N(k) < 1e-9


class KOffset(NamedTuple):
    k0: float
    reflect: bool
    residual: float


@dataclass(frozen=True, eq=False)
class WindingResult:
    W: int
    chiral_axis: np.ndarray
    arc: np.ndarray
    residual: float
    max_axis_overlap: float


@dataclass(frozen=True)
class SpreadingCoefficient:
    L: float
    method: str

    METHODS = ("quadrature", "closed_form", "residue")


@dataclass(frozen=True, eq=False)
class ResidueReport:
    poles: np.ndarray
    residues: np.ndarray          # r_k from the closed-form list
    residues_numeric: np.ndarray  # r_k from small contour integrals
    inside: np.ndarray
    total: float
    total_imag: float
    max_residue_error: float


class AsymptoticMoments(NamedTuple):
    M1_per_step: float
    M2_per_step2: float


# --------------------------------------------------------------------------
# Bloch operator
# --------------------------------------------------------------------------

def _as_params(params) -> StepParams:
    return params if isinstance(params, StepParams) else StepParams(params)


def bloch_operators(params: StepParams, ks) -> np.ndarray:
    """``U(k) = Q(k) W`` for every ``k`` in ``ks``; shape ``(len(ks), 2, 2)``."""
    params = _as_params(params)
    ks = np.atleast_1d(np.asarray(ks, dtype=np.float64))
    c, s, j = params.cos_half, params.sin_half, params.shift
    q = np.empty((ks.size, 2, 2), dtype=np.complex128)
    q[:, 0, 0] = c
    q[:, 1, 1] = c
    q[:, 0, 1] = 1j * s * np.exp(1j * j * ks)
    q[:, 1, 0] = 1j * s * np.exp(-1j * j * ks)
    return q @ QWP_MATRIX


def bloch_operator(params: StepParams, k: float) -> BlochMatrix:
    k = float(k)
    if not -math.pi <= k < math.pi:
        raise ValidationError(f"k must lie in [-pi, pi), got {k!r}")
    return BlochMatrix(k, bloch_operators(params, [k])[0])


def diagonalize_bloch(u) -> BlochDecomposition:
    """Split a 2x2 unitary into global phase, quasi-energy and Bloch vector.

    The phase is the principal value ``-arg(det U)/2``. ``n`` is ``None`` when
    ``sin E < 1e-9`` (bands touch).
    """
    m = u.entries if isinstance(u, BlochMatrix) else np.asarray(u, dtype=np.complex128)
    energy, n, phase, sin_e = _kernels.su2_decompose(m.reshape(1, 2, 2).astype(np.complex128))
    degenerate = bool(sin_e[0] < DEGENERATE_TOL)
    return BlochDecomposition(
        float(energy[0]), None if degenerate else n[0].copy(), float(phase[0]), degenerate,
    )


def diagonalize_batch(us: np.ndarray):
    """Vectorized :func:`diagonalize_bloch`: returns ``(E, n, phase, degenerate)`` arrays."""
    energy, n, phase, sin_e = _kernels.su2_decompose(np.ascontiguousarray(us, dtype=np.complex128))
    return energy, n, phase, sin_e < DEGENERATE_TOL


def reconstruct(dec: BlochDecomposition) -> np.ndarray:
    n = np.zeros(3) if dec.n is None else dec.n
    m = math.cos(dec.E) * np.eye(2) - 1j * math.sin(dec.E) * np.einsum("i,ijk->jk", n, SIGMA)
    return np.exp(-1j * dec.phase) * m


_OFFSETS = (0.0, 0.5 * math.pi, -0.5 * math.pi, math.pi)


def detect_k_offset(params: StepParams, grid: int = 512) -> KOffset:
    """Find the momentum map ``k -> +/-(2q) k + k0`` that carries the operator's
    bands onto the formula bands.

    Candidates are ``k0`` in {0, pi/2, -pi/2, pi} with and without reflection;
    the one with the smallest max deviation in (E, n) is returned.
    """
    params = _as_params(params)
    ks = bz_grid(grid)
    energy, n_op, _, degen = diagonalize_batch(bloch_operators(params, ks))
    best = None
    for reflect in (False, True):
        for k0 in _OFFSETS:
            kk = (-1.0 if reflect else 1.0) * params.shift * ks + k0
            e_f = quasi_energy(params.delta, kk)
            bv = bloch_vector(params.delta, kk)
            ok = ~(degen | bv.degenerate)
            res = float(np.max(np.abs(energy - e_f)))
            if ok.any():
                res = max(res, float(np.max(np.abs(n_op[ok] - bv.n[ok]))))
            if best is None or res < best.residual:
                best = KOffset(k0, reflect, res)
    return best


# --------------------------------------------------------------------------
# band formulas
# --------------------------------------------------------------------------

def _half_angle_terms(delta, k):
    """``1 - cos E`` and ``1 + cos E`` without cancellation near the gap closures."""
    delta = np.asarray(delta, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    s = np.sin(0.5 * delta)
    one_minus = 2.0 * np.sin(0.25 * delta - math.pi / 8) ** 2 + SQRT2 * s * np.sin(0.5 * k) ** 2
    one_plus = 2.0 * np.cos(0.25 * delta + math.pi / 8) ** 2 + SQRT2 * s * np.cos(0.5 * k) ** 2
    return one_minus, one_plus


def _scalar_or_array(x, scalar: bool):
    return float(x) if scalar else x


def quasi_energy(delta, k, band: int = 1):
    """Quasi-energy of the upper (``band=1``) or lower (``band=-1``) band.

    Upper band ``E = arccos([cos(delta/2) + sin(delta/2) cos k]/sqrt 2)`` in [0, pi].
    """
    scalar = np.ndim(delta) == 0 and np.ndim(k) == 0
    one_minus, one_plus = _half_angle_terms(delta, k)
    energy = 2.0 * np.arctan2(np.sqrt(one_minus), np.sqrt(one_plus))
    return _scalar_or_array(band * energy, scalar)


def band_gap(delta, k):
    """Separation of the two bands on the quasi-energy circle, ``2 min(E, pi - E)``."""
    energy = quasi_energy(delta, k)
    return 2.0 * np.minimum(energy, math.pi - energy)


def _norm_factor(delta, k):
    one_minus, one_plus = _half_angle_terms(delta, k)
    return np.sqrt(2.0 * one_minus * one_plus)


def bloch_vector(delta, k) -> BlochVector:
    """Unit Bloch vector n(k) and normalization ``N(k) = sqrt(2 (1 - cos^2 E))``.

    ``n = (cos(delta/2) - sin(delta/2) cos k, -sin(delta/2) sin k,
    sin(delta/2) sin k) / N``. Rows where ``N < 1e-9`` are NaN.
    """
    delta = np.asarray(delta, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    c, s = np.cos(0.5 * delta), np.sin(0.5 * delta)
    norm = _norm_factor(delta, k)
    degenerate = norm < DEGENERATE_TOL
    safe = np.where(degenerate, 1.0, norm)
    ny = -s * np.sin(k) / safe
    n = np.stack(np.broadcast_arrays(
        (c - s * np.cos(k)) / safe, ny, -ny), axis=-1)
    n = np.where(degenerate[..., None], np.nan, n)
    return BlochVector(n, norm, degenerate)


def group_velocity(delta, k, band: int = 1):
    """``dE/dk`` of the chosen band; NaN where the gap is closed.

    Upper band: ``V = sin(delta/2) sin k / sqrt(2 - [cos(delta/2) + sin(delta/2) cos k]^2)``,
    which equals ``n_z = -n_y``. A scalar call at a gap closure raises
    :class:`GapClosedError`.
    """
    scalar = np.ndim(delta) == 0 and np.ndim(k) == 0
    norm = _norm_factor(delta, k)
    s = np.sin(0.5 * np.asarray(delta, dtype=np.float64))
    closed = norm < DEGENERATE_TOL
    if scalar and closed:
        raise GapClosedError(f"gap closed at delta={float(delta)!r}, k={float(k)!r}")
    v = np.where(closed, np.nan, band * s * np.sin(k) / np.where(closed, 1.0, norm))
    return _scalar_or_array(v, scalar)


def band_point(delta: float, k: float) -> BandPoint:
    bv = bloch_vector(delta, k)
    if bv.degenerate:
        raise GapClosedError(f"gap closed at delta={delta!r}, k={k!r}")
    n = tuple(float(x) for x in bv.n)
    return BandPoint(float(k), quasi_energy(delta, k), group_velocity(delta, k), n, float(bv.norm))


def max_group_velocity(delta: float, grid: int = 2048) -> tuple[float, float]:
    """``(k*, max_k |V|)`` for the upper band, refined with a bounded scalar search."""
    ks = np.linspace(0.0, math.pi, grid + 1)
    v = np.nan_to_num(np.abs(group_velocity(delta, ks)))
    i = int(np.argmax(v))
    lo, hi = ks[max(i - 1, 0)], ks[min(i + 1, grid)]
    res = minimize_scalar(
        lambda kk: -abs(group_velocity(delta, kk)) if _norm_factor(delta, kk) >= DEGENERATE_TOL else 0.0,
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-12},
    )
    if -res.fun > v[i]:
        return float(res.x), float(-res.fun)
    return float(ks[i]), float(v[i])


# --------------------------------------------------------------------------
# topology
# --------------------------------------------------------------------------

def _check_gapped(delta: float):
    for t in TRANSITIONS:
        if abs(delta - t) <= GAPLESS_GUARD:
            raise GapClosedError(
                f"winding undefined at transition (delta={delta!r} is within "
                f"{GAPLESS_GUARD:g} of {t:.6f})")


def rotated_bloch_vector(delta, k) -> np.ndarray:
    """n(k) rotated by pi/4 about x, so the chiral axis becomes z and n'_z = 0."""
    return bloch_vector(delta, k).n @ ROT_X.T


def winding_number(delta: float, grid: int = 1024) -> WindingResult:
    """Signed number of turns of n(k) around the chiral axis as k crosses the zone."""
    delta = float(delta)
    if not 0.0 <= delta <= TWO_PI:
        raise ValidationError(f"delta must lie in [0, {TWO_PI:.4f}]")
    if grid < 64:
        raise ValidationError(f"winding grid must have at least 64 points, got {grid}")
    _check_gapped(delta)

    def xy(ks):
        n_rot = rotated_bloch_vector(delta, ks)
        return n_rot[:, 0], n_rot[:, 1]

    total, arc = planar_winding(xy, grid)
    turns = total / TWO_PI
    w = int(round(turns))
    ks = bz_grid(grid)
    overlap = float(np.max(np.abs(bloch_vector(delta, ks).n @ CHIRAL_AXIS)))
    return WindingResult(w, CHIRAL_AXIS.copy(), arc, abs(turns - w), overlap)


def rotated_hamiltonians(delta: float, ks) -> np.ndarray:
    """``H'(k) = E(k) n'(k) . sigma`` in the frame where the chiral axis is z."""
    ks = np.atleast_1d(np.asarray(ks, dtype=np.float64))
    energy = np.atleast_1d(quasi_energy(delta, ks))
    n_rot = rotated_bloch_vector(delta, ks)
    return energy[:, None, None] * np.einsum("ki,ijl->kjl", n_rot, SIGMA)


def bdi_residuals(delta: float, ks) -> tuple[float, float]:
    """Max deviation of the rotated-frame Hamiltonian from chiral
    (sigma_z H sigma_z = -H) and time-reversal (H(k)* = H(-k)) symmetry."""
    ks = np.asarray(ks, dtype=np.float64)
    h = rotated_hamiltonians(delta, ks)
    chiral = SIGMA[2] @ h @ SIGMA[2] + h
    trs = np.conj(h) - rotated_hamiltonians(delta, -ks)
    return float(np.max(np.abs(chiral))), float(np.max(np.abs(trs)))


# --------------------------------------------------------------------------
# spreading coefficient
# --------------------------------------------------------------------------

def spreading_coefficient_numeric(delta: float, grid: int = 4096) -> SpreadingCoefficient:
    """Zone average of V^2 by the trapezoid rule on a uniform periodic grid."""
    if grid < 256:
        raise ValidationError(f"quadrature grid must have at least 256 points, got {grid}")
    v = group_velocity(float(delta), bz_grid(grid))
    return SpreadingCoefficient(periodic_mean(v * v), "quadrature")


def spreading_coefficient_closed(delta: float) -> SpreadingCoefficient:
    delta = float(delta)
    if not 0.0 <= delta <= TWO_PI:
        raise ValidationError(f"delta must lie in [0, {TWO_PI:.4f}]")
    if delta <= TRANSITIONS[0]:
        value = 2.0 * math.sin(0.25 * delta) ** 2
    elif delta < TRANSITIONS[1]:
        value = PLATEAU
    else:
        value = 2.0 * math.cos(0.25 * delta) ** 2
    return SpreadingCoefficient(value, "closed_form")


def residue_integrand(z, delta: float):
    """``f(z)`` whose unit-circle integral is L(delta), with ``z = e^{ik}``."""
    z = np.asarray(z, dtype=np.complex128)
    s2 = math.sin(0.5 * delta) ** 2
    zz = z * z
    den = (1 + zz) ** 2 * math.cos(delta) - zz * zz - 10 * zz - 1 - 4j * z * (zz - 1) * math.sin(delta)
    return 1j * (1 + zz) ** 2 * s2 / (math.pi * z * den)


def residue_poles(delta: float) -> np.ndarray:
    t = math.tan(0.25 * delta)
    return np.array([
        0.0,
        1j * (SQRT2 - 1) / t,
        1j * (SQRT2 + 1) * t,
        -1j * (SQRT2 + 1) / t,
        -1j * (SQRT2 - 1) * t,
    ], dtype=np.complex128)


def residue_values(delta: float) -> np.ndarray:
    """``2 pi i r_k`` at the poles of :func:`residue_poles`, in the same order."""
    c = math.cos(0.5 * delta)
    return np.array([
        1.0,
        0.25 * (-SQRT2 + 2 * c),
        0.25 * (SQRT2 - 2 * c),
        0.25 * (SQRT2 + 2 * c),
        0.25 * (-SQRT2 - 2 * c),
    ], dtype=np.complex128)


def _contour_radius(poles: np.ndarray, i: int, radius: float) -> float:
    others = np.delete(poles, i)
    sep = float(np.min(np.abs(others - poles[i]))) if others.size else np.inf
    return min(radius, 0.25 * sep)


def build_residue_report(func, poles, two_pi_i_r, radius=1e-3, points=64) -> ResidueReport:
    residues = two_pi_i_r / (2j * math.pi)
    numeric = np.array([
        circle_residue(func, p, _contour_radius(poles, i, radius), points)
        for i, p in enumerate(poles)
    ])
    inside = np.abs(poles) < 1.0
    total = complex(np.sum(two_pi_i_r[inside]))
    err = float(np.max(np.abs(2j * math.pi * (numeric - residues))))
    return ResidueReport(poles, residues, numeric, inside, total.real, total.imag, err)


def residue_oracle(delta: float, radius: float = 1e-3, points: int = 64) -> ResidueReport:
    """Pole/residue bookkeeping for L(delta) with a numeric check of every residue."""
    delta = float(delta)
    if not 0.0 < delta < TWO_PI:
        raise ValidationError("residue method needs 0 < delta < 2 pi")
    poles = residue_poles(delta)
    if np.any(np.abs(np.abs(poles) - 1.0) < 1e-6):
        raise ValidationError(
            f"a pole lies on the unit circle at delta={delta!r}; residue sum undefined")
    report = build_residue_report(lambda z: residue_integrand(z, delta), poles,
                                  residue_values(delta), radius, points)
    if report.max_residue_error > 1e-8:
        raise ArithmeticError(
            f"tabulated residues disagree with contour integrals by {report.max_residue_error:.3e}")
    return report


def spreading_coefficient_residue(delta: float) -> SpreadingCoefficient:
    return SpreadingCoefficient(residue_oracle(delta).total, "residue")


def spreading_coefficient(delta: float, method: str = "closed_form", grid: int = 4096) -> SpreadingCoefficient:
    if method == "quadrature":
        return spreading_coefficient_numeric(delta, grid)
    if method == "closed_form":
        return spreading_coefficient_closed(delta)
    if method == "residue":
        return spreading_coefficient_residue(delta)
    raise ValidationError(f"method must be one of {SpreadingCoefficient.METHODS}, got {method!r}")


def asymptotic_moments(delta: float, coin: CoinState) -> AsymptoticMoments:
    """Large-n limits ``M1/n -> (s_y - s_z) L`` and ``M2/n^2 -> L``."""
    _, s_y, s_z = coin_expectations(coin)
    big_l = spreading_coefficient_closed(delta).L
    return AsymptoticMoments((s_y - s_z) * big_l, big_l)
