"""Parameter sweeps behind the moment-vs-parameter figures, and a kink detector.

Each sweep returns a list of flat ``dict`` rows whose keys are listed in the
matching ``*_COLUMNS`` tuple. Rows are independent; with ``workers > 1`` they
are evaluated on a thread pool and reassembled in grid order, so results do
not depend on scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bands, ssh
from .errors import ValidationError
from .walk import (
    TWO_PI, CoinState, LatticeState, StepParams, distribution, moments, propagate,
    sample_counts, sampled_moments,
)

DELTA_COLUMNS = (
    "delta", "M1_over_n", "sqrtM2_over_n", "L_closed", "sqrtL_closed", "M2_over_n2",
    "M1_asymptotic", "n",
)
COIN_COLUMNS = (
    "delta", "theta", "M1_over_n", "sqrtM2_over_n", "L_closed", "sqrtL_closed",
    "M2_over_n2", "n",
)
SAMPLED_COLUMNS = (
    "shots", "M1_over_n_sampled", "M1_over_n_err", "sqrtM2_over_n_sampled",
    "sqrtM2_over_n_err",
)
SSH_COLUMNS = (
    "t", "t_prime", "tau", "M1_over_tau", "M2_over_tau2", "L_closed", "L_residue",
    "M2_over_tau2t2", "L_over_t2",
)
CONVERGENCE_COLUMNS = ("n", "delta", "M1_over_n", "M2_over_n2", "L_closed", "M1_asymptotic")

KINDS = ("delta_sweep", "coin_sweep", "ssh_sweep", "convergence")


@dataclass(frozen=True)
class SweepConfig:
    """One sweep.

    ``start``, ``stop``, ``count`` describe the swept parameter: delta for
    ``delta_sweep``, the coin polar angle theta for ``coin_sweep``, t' for
    ``ssh_sweep`` and the step count n for ``convergence``. ``shots = 0`` means
    exact columns only.
    """

    kind: str
    start: float
    stop: float
    count: int
    n: int = 6
    tau: float = 50.0
    coin: CoinState = field(default_factory=lambda: CoinState(0.0, 1.0))
    deltas: tuple[float, ...] = (math.pi,)
    delta: float = math.pi
    t: float = 1.0
    chi0: CoinState = ssh.SUBLATTICE_A
    shots: int = 0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.count) != self.count or self.count < 2:
            raise ValidationError(f"grid count must be an integer >= 2, got {self.count!r}")
        if not self.start < self.stop:
            raise ValidationError(f"grid start {self.start!r} must be below stop {self.stop!r}")
        lo, hi = _DOMAINS[self.kind]
        if self.start < lo or self.stop > hi:
            raise ValidationError(f"{self.kind} grid must lie in [{lo:.4f}, {hi:.4f}]")
        if self.shots < 0:
            raise ValidationError(f"shots must be non-negative, got {self.shots!r}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers!r}")
        if self.kind in ("delta_sweep", "coin_sweep") and self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n!r}")

    def grid(self) -> np.ndarray:
        values = np.linspace(self.start, self.stop, int(self.count))
        if self.kind == "convergence":
            values = np.unique(np.round(values).astype(np.int64))
        return values


_DOMAINS = {
    "delta_sweep": (0.0, TWO_PI),
    "coin_sweep": (0.0, math.pi),
    "ssh_sweep": (0.0, math.inf),
    "convergence": (1.0, math.inf),
}


def grid_count(start: float, stop: float, step: float) -> int:
    """Number of points of ``start, start + step, ...`` up to ``stop`` inclusive."""
    if step <= 0:
        raise ValidationError(f"step must be positive, got {step!r}")
    return int(math.floor((stop - start) / step + 1e-9)) + 1


def _map(func, items, workers: int):
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _row_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def _walk_row(delta: float, coin: CoinState, n: int, shots: int, seed) -> dict:
    dist = distribution(propagate(LatticeState.localized(coin), StepParams(delta), n))
    rep = moments(dist, n)
    big_l = bands.spreading_coefficient_closed(delta).L
    row = {
        "delta": float(delta),
        "M1_over_n": rep.M1_over_n,
        "sqrtM2_over_n": math.sqrt(rep.M2) / n,
        "L_closed": big_l,
        "sqrtL_closed": math.sqrt(big_l),
        "M2_over_n2": rep.M2_over_n2,
        "M1_asymptotic": bands.asymptotic_moments(delta, coin).M1_per_step,
        "n": n,
    }
    if shots:
        est = sampled_moments(sample_counts(dist, shots, seed))
        root = math.sqrt(est.M2)
        row.update({
            "shots": shots,
            "M1_over_n_sampled": est.M1 / n,
            "M1_over_n_err": est.M1_err / n,
            "sqrtM2_over_n_sampled": root / n,
            "sqrtM2_over_n_err": est.M2_err / (2.0 * root * n) if root > 0 else 0.0,
        })
    return row


def run_delta_sweep(config: SweepConfig) -> list[dict]:
    """Exact n-step moments from ``(m=0, coin)`` against their asymptotes, per delta."""
    if config.kind != "delta_sweep":
        raise ValidationError("run_delta_sweep needs a delta_sweep config")
    deltas = config.grid()

    def one(i):
        return _walk_row(deltas[i], config.coin, config.n, config.shots, _row_seed(config.seed, i))

    return _map(one, range(deltas.size), config.workers)


def run_coin_sweep(config: SweepConfig) -> list[dict]:
    """Moments for coins ``cos(theta/2)|L> + sin(theta/2)|R>`` at each delta in ``config.deltas``."""
    if config.kind != "coin_sweep":
        raise ValidationError("run_coin_sweep needs a coin_sweep config")
    for d in config.deltas:
        if not 0.0 <= d <= TWO_PI:
            raise ValidationError(f"delta must lie in [0, {TWO_PI:.4f}]")
    thetas = config.grid()
    jobs = [(d, th) for d in config.deltas for th in thetas]

    def one(i):
        d, th = jobs[i]
        row = _walk_row(d, CoinState.meridian(th), config.n, config.shots, _row_seed(config.seed, i))
        row["theta"] = float(th)
        del row["M1_asymptotic"]
        return row

    return _map(one, range(len(jobs)), config.workers)


def run_ssh_sweep(config: SweepConfig) -> list[dict]:
    """``M2/tau^2`` of the bulk SSH evolution against the closed-form L, per t'."""
    if config.kind != "ssh_sweep":
        raise ValidationError("run_ssh_sweep needs an ssh_sweep config")
    if config.tau <= 0:
        raise ValidationError(f"tau must be positive, got {config.tau!r}")
    t_primes = config.grid()

    def one(i):
        params = ssh.SSHParams(config.t, t_primes[i])
        dist = ssh.ssh_evolve(ssh.SSHEvolutionConfig.auto(params, config.tau, config.chi0))
        rep = moments(dist)
        big_l = ssh.ssh_L(params, "closed_form").L
        try:
            l_res = ssh.ssh_L(params, "residue").L
        except ValidationError:
            l_res = math.nan
        tau2 = config.tau ** 2
        return {
            "t": params.t,
            "t_prime": params.t_prime,
            "tau": float(config.tau),
            "M1_over_tau": rep.M1 / config.tau,
            "M2_over_tau2": rep.M2 / tau2,
            "L_closed": big_l,
            "L_residue": l_res,
            "M2_over_tau2t2": rep.M2 / (tau2 * params.t ** 2) if params.t > 0 else math.nan,
            "L_over_t2": big_l / params.t ** 2 if params.t > 0 else math.nan,
        }

    return _map(one, range(t_primes.size), config.workers)


def run_convergence(config: SweepConfig) -> list[dict]:
    """Normalized moments versus step number at fixed ``config.delta``."""
    if config.kind != "convergence":
        raise ValidationError("run_convergence needs a convergence config")
    ns = config.grid()
    asym = bands.asymptotic_moments(config.delta, config.coin)
    big_l = bands.spreading_coefficient_closed(config.delta).L

    def one(i):
        n = int(ns[i])
        rep = moments(distribution(propagate(
            LatticeState.localized(config.coin), StepParams(config.delta), n)), n)
        return {
            "n": n,
            "delta": float(config.delta),
            "M1_over_n": rep.M1_over_n,
            "M2_over_n2": rep.M2_over_n2,
            "L_closed": big_l,
            "M1_asymptotic": asym.M1_per_step,
        }

    return _map(one, range(ns.size), config.workers)


RUNNERS = {
    "delta_sweep": run_delta_sweep,
    "coin_sweep": run_coin_sweep,
    "ssh_sweep": run_ssh_sweep,
    "convergence": run_convergence,
}


def run(config: SweepConfig) -> list[dict]:
    return RUNNERS[config.kind](config)


def detect_transition(rows: list[dict], x: str, y: str, factor: float = 5.0,
                      atol: float = 1e-12) -> list[float]:
    """Locate slope discontinuities in ``y(x)`` from the second difference.

    Returns the ``x`` values (in increasing order) where ``|second difference|``
    has a strict local maximum above ``max(factor * median, atol)``. The rows
    must be uniformly spaced in ``x``.
    """
    if len(rows) < 5:
        raise ValidationError("kink detection needs at least 5 rows")
    xs = np.array([float(r[x]) for r in rows])
    ys = np.array([float(r[y]) for r in rows])
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    dx = np.diff(xs)
    if np.any(np.abs(dx - dx.mean()) > 1e-6 * abs(dx.mean())):
        raise ValidationError("kink detection needs uniformly spaced rows")
    d2 = np.abs(ys[2:] - 2.0 * ys[1:-1] + ys[:-2])
    threshold = max(factor * float(np.median(d2)), atol)
    kinks = []
    for i in range(1, d2.size - 1):
        if d2[i] > threshold and d2[i] > d2[i - 1] and d2[i] >= d2[i + 1]:
            kinks.append(float(xs[i + 1]))
    return kinks
