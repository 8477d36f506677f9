"""Coin/walker states and the exact discrete-time walk.

One step is ``U = Q(delta) W`` where ``W`` is the quarter-wave plate acting on
the coin and ``Q`` the q-plate, which keeps a coin component in place with
amplitude cos(delta/2) and flips it while shifting the walker by 2q with
amplitude i sin(delta/2)::

    Q |L, m> = cos(delta/2) |L, m> + i sin(delta/2) |R, m + 2q>
    Q |R, m> = cos(delta/2) |R, m> + i sin(delta/2) |L, m - 2q>

The coin basis is ordered (|L>, |R>) and |L> is the +1 eigenstate of sigma_z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError

TWO_PI = 2.0 * math.pi
STATE_TOL = 1e-12
DIST_TOL = 1e-10

_S = 1.0 / math.sqrt(2.0)
# quarter-wave plate at 90 degrees in the circular basis; columns are W|L>, W|R>
QWP_MATRIX = np.array([[_S, -1j * _S], [-1j * _S, _S]], dtype=np.complex128)
QWP_MATRIX.flags.writeable = False

_IDENTITY = np.eye(2, dtype=np.complex128)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CoinState:
    """Normalized coin spinor ``alpha |L> + beta |R>``."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > STATE_TOL:
            raise ValidationError(f"coin state is not normalized (|alpha|^2+|beta|^2 = {norm!r})")

    @classmethod
    def normalized(cls, alpha: complex, beta: complex) -> "CoinState":
        norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        if norm == 0.0:
            raise ValidationError("coin state has zero norm")
        return cls(alpha / norm, beta / norm)

    @classmethod
    def meridian(cls, theta: float) -> "CoinState":
        """``cos(theta/2)|L> + sin(theta/2)|R>``, a point on the x-z meridian."""
        return cls(math.cos(theta / 2.0), math.sin(theta / 2.0))

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=np.complex128)


L_COIN = CoinState(1.0, 0.0)
R_COIN = CoinState(0.0, 1.0)


@dataclass(frozen=True)
class StepParams:
    """Retardation ``delta`` (radians) and q-plate charge ``q``.

    ``delta`` outside [0, 2pi] is reduced modulo 2pi. ``2q`` must be a
    positive integer; it is the lattice shift of one q-plate action.
    """

    delta: float
    q: float = 0.5

    def __post_init__(self):
        delta = float(self.delta)
        if not math.isfinite(delta):
            raise ValidationError("delta must be finite")
        if not 0.0 <= delta <= TWO_PI:
            delta = math.fmod(delta, TWO_PI)
            if delta < 0.0:
                delta += TWO_PI
        object.__setattr__(self, "delta", delta)
        twice = 2.0 * float(self.q)
        if twice < 0.5 or abs(twice - round(twice)) > 1e-12:
            raise ValidationError(f"2q must be a positive integer, got q={self.q!r}")
        object.__setattr__(self, "q", round(twice) / 2.0)

    @property
    def shift(self) -> int:
        return int(round(2.0 * self.q))

    @property
    def cos_half(self) -> float:
        return math.cos(self.delta / 2.0)

    @property
    def sin_half(self) -> float:
        return math.sin(self.delta / 2.0)


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Spinor wavefunction on integer sites ``min_site .. min_site + len(amps) - 1``.

    ``amps[i] = (a_L, a_R)`` at site ``min_site + i``. The array is read-only.
    """

    min_site: int
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.complex128, copy=True)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] == 0:
            raise ValidationError("amps must have shape (sites, 2) with at least one site")
        object.__setattr__(self, "min_site", int(self.min_site))
        object.__setattr__(self, "amps", _frozen(amps))
        norm = self.norm()
        if abs(norm - 1.0) > STATE_TOL:
            raise ValidationError(f"lattice state is not normalized (norm = {norm!r})")

    @classmethod
    def _wrap(cls, min_site: int, amps: np.ndarray) -> "LatticeState":
        # trusted constructor for kernel output: no copy, no norm check
        obj = object.__new__(cls)
        object.__setattr__(obj, "min_site", int(min_site))
        object.__setattr__(obj, "amps", _frozen(amps))
        return obj

    @classmethod
    def localized(cls, coin: CoinState, site: int = 0) -> "LatticeState":
        return cls(site, coin.as_array()[None, :])

    @property
    def max_site(self) -> int:
        return self.min_site + self.amps.shape[0] - 1

    def sites(self) -> np.ndarray:
        return np.arange(self.min_site, self.max_site + 1)

    def norm(self) -> float:
        return float(np.sum(self.amps.real ** 2 + self.amps.imag ** 2))

    def amplitude(self, site: int) -> np.ndarray:
        i = site - self.min_site
        if 0 <= i < self.amps.shape[0]:
            return self.amps[i].copy()
        return np.zeros(2, dtype=np.complex128)

    def padded(self, left: int, right: int) -> "LatticeState":
        amps = np.zeros((self.amps.shape[0] + left + right, 2), dtype=np.complex128)
        amps[left:left + self.amps.shape[0]] = self.amps
        return LatticeState._wrap(self.min_site - left, amps)

    def trimmed(self) -> "LatticeState":
        """Drop all-zero sites at both ends."""
        nz = np.flatnonzero(np.any(self.amps != 0, axis=1))
        if nz.size == 0:
            return self
        lo, hi = int(nz[0]), int(nz[-1])
        return LatticeState._wrap(self.min_site + lo, self.amps[lo:hi + 1].copy())

    def window(self, min_site: int, max_site: int) -> np.ndarray:
        """Amplitudes on ``[min_site, max_site]``, zero outside the stored range."""
        out = np.zeros((max_site - min_site + 1, 2), dtype=np.complex128)
        lo = max(min_site, self.min_site)
        hi = min(max_site, self.max_site)
        if lo <= hi:
            out[lo - min_site:hi - min_site + 1] = self.amps[lo - self.min_site:hi - self.min_site + 1]
        return out


@dataclass(frozen=True, eq=False)
class ProbabilityDistribution:
    """Walker distribution P(m) for ``m = min_site ..``."""

    min_site: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64, copy=True)
        if probs.ndim != 1 or probs.size == 0:
            raise ValidationError("probs must be a non-empty 1-d array")
        if np.any(probs < 0.0):
            raise ValidationError("probabilities must be non-negative")
        total = float(probs.sum())
        if abs(total - 1.0) > DIST_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "min_site", int(self.min_site))
        object.__setattr__(self, "probs", _frozen(probs))

    @classmethod
    def from_dict(cls, mapping: dict[int, float]) -> "ProbabilityDistribution":
        lo, hi = min(mapping), max(mapping)
        probs = np.zeros(hi - lo + 1)
        for m, p in mapping.items():
            probs[m - lo] = p
        return cls(lo, probs)

    def sites(self) -> np.ndarray:
        return np.arange(self.min_site, self.min_site + self.probs.size)

    def as_dict(self, drop_zeros: bool = True) -> dict[int, float]:
        return {
            int(m): float(p)
            for m, p in zip(self.sites(), self.probs)
            if p != 0.0 or not drop_zeros
        }


@dataclass(frozen=True)
class MomentReport:
    n: int | None
    M1: float
    M2: float
    M1_over_n: float | None
    M2_over_n2: float | None

    @property
    def variance(self) -> float:
        return self.M2 - self.M1 ** 2


@dataclass(frozen=True, eq=False)
class SiteCounts:
    """Detector counts per site, as produced by :func:`sample_counts`."""

    min_site: int
    counts: np.ndarray = field(repr=False)

    @property
    def shots(self) -> int:
        return int(self.counts.sum())

    def sites(self) -> np.ndarray:
        return np.arange(self.min_site, self.min_site + self.counts.size)

    def as_dict(self) -> dict[int, int]:
        return {int(m): int(c) for m, c in zip(self.sites(), self.counts) if c}


@dataclass(frozen=True)
class SampledMoments:
    """Moments estimated from counts, with one-sigma Poisson errors."""

    shots: int
    M1: float
    M1_err: float
    M2: float
    M2_err: float


# --------------------------------------------------------------------------
# single operators
# --------------------------------------------------------------------------

def apply_qwp(state: LatticeState) -> LatticeState:
    """Apply the quarter-wave plate to every site's coin."""
    amps = state.amps @ QWP_MATRIX.T
    return LatticeState._wrap(state.min_site, amps)


def apply_qplate(state: LatticeState, params: StepParams) -> LatticeState:
    """Apply the q-plate; the window grows by ``2q`` on a side only if needed."""
    j = params.shift
    grow_left = j if np.any(state.amps[:j, 1] != 0) else 0
    grow_right = j if np.any(state.amps[-j:, 0] != 0) else 0
    a = state.padded(grow_left, grow_right).amps
    out = _kernels.walk_final_np(
        np.ascontiguousarray(a), _IDENTITY, params.cos_half, params.sin_half, j, 1,
    )
    return LatticeState._wrap(state.min_site - grow_left, out)


def _kernel_args(params: StepParams):
    return QWP_MATRIX, params.cos_half, params.sin_half, params.shift


def step(state: LatticeState, params: StepParams) -> LatticeState:
    """One walk step ``Q(delta) W``; the window grows by ``2q`` on each side."""
    j = params.shift
    a = state.padded(j, j).amps
    out = _kernels.walk_final(a, *_kernel_args(params), 1)
    return LatticeState._wrap(state.min_site - j, out)


def _check_steps(n) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise ValidationError(f"step count must be an integer, got {n!r}")
    n = int(n)
    if n < 0:
        raise ValidationError(f"step count must be non-negative, got {n}")
    return n


def evolve(initial: LatticeState, params: StepParams, n: int) -> list[LatticeState]:
    """Return ``[initial, U initial, ..., U^n initial]``.

    All returned states share the window ``[min - 2qn, max + 2qn]`` so that
    ballistic spreading never reaches the array edge.
    """
    n = _check_steps(n)
    pad = params.shift * n
    start = initial.padded(pad, pad)
    hist = _kernels.walk_history(start.amps, *_kernel_args(params), n)
    return [LatticeState._wrap(start.min_site, hist[t]) for t in range(n + 1)]


def propagate(initial: LatticeState, params: StepParams, n: int) -> LatticeState:
    """Return only ``U^n initial`` (same window as ``evolve(...)[-1]``)."""
    n = _check_steps(n)
    pad = params.shift * n
    start = initial.padded(pad, pad)
    out = _kernels.walk_final(start.amps, *_kernel_args(params), n)
    return LatticeState._wrap(start.min_site, out)


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------

def distribution(state: LatticeState) -> ProbabilityDistribution:
    """Marginal walker distribution ``P(m) = |a_L(m)|^2 + |a_R(m)|^2``."""
    a = state.amps
    probs = (a.real ** 2 + a.imag ** 2).sum(axis=1)
    return ProbabilityDistribution(state.min_site, probs)


def moments(dist: ProbabilityDistribution, n: int | None = None) -> MomentReport:
    """First and second moments; normalized by ``n`` and ``n**2`` when ``n`` is given."""
    m = dist.sites().astype(np.float64)
    p = dist.probs
    m1 = float(np.dot(m, p))
    m2 = float(np.dot(m * m, p))
    if n is None:
        return MomentReport(None, m1, m2, None, None)
    n = _check_steps(n)
    if n == 0:
        raise ValidationError("normalized moments need n >= 1")
    return MomentReport(n, m1, m2, m1 / n, m2 / n ** 2)


def coin_expectations(coin: CoinState) -> tuple[float, float, float]:
    """Pauli expectation values ``(s_x, s_y, s_z)`` of a coin state."""
    if not isinstance(coin, CoinState):
        coin = CoinState(*coin)
    ab = coin.alpha.conjugate() * coin.beta
    s_x = 2.0 * ab.real
    s_y = 2.0 * ab.imag
    s_z = abs(coin.alpha) ** 2 - abs(coin.beta) ** 2
    return s_x, s_y, s_z


def sample_counts(dist: ProbabilityDistribution, shots: int, seed: int) -> SiteCounts:
    """Multinomial detector counts by inverse-CDF sampling.

    The generator is numpy's counter-based Philox seeded with ``seed``, so equal
    seeds give identical counts.
    """
    if isinstance(shots, bool) or int(shots) != shots or shots < 0:
        raise ValidationError(f"shots must be a non-negative integer, got {shots!r}")
    shots = int(shots)
    counts = np.zeros(dist.probs.size, dtype=np.int64)
    if shots:
        rng = np.random.Generator(np.random.Philox(seed))
        cdf = np.cumsum(dist.probs)
        u = rng.random(shots) * cdf[-1]
        idx = np.searchsorted(cdf, u, side="right")
        counts = np.bincount(idx, minlength=dist.probs.size).astype(np.int64)
    return SiteCounts(dist.min_site, _frozen(counts))


def sampled_moments(counts: SiteCounts) -> SampledMoments:
    """Moment estimates with errors from independent Poisson counts per site.

    Treating each count ``c_m`` as Poisson with variance ``c_m`` and propagating
    through ``M_j = sum m^j c_m / sum c_m`` gives
    ``var(M_j) = sum (m^j - M_j)^2 c_m / S^2``.
    """
    c = counts.counts.astype(np.float64)
    total = c.sum()
    if total == 0:
        raise ValidationError("cannot estimate moments from zero counts")
    m = counts.sites().astype(np.float64)
    m1 = float(np.dot(m, c) / total)
    m2 = float(np.dot(m * m, c) / total)
    err1 = math.sqrt(float(np.dot((m - m1) ** 2, c))) / total
    err2 = math.sqrt(float(np.dot((m * m - m2) ** 2, c))) / total
    return SampledMoments(int(total), m1, err1, m2, err2)
