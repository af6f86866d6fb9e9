"""Parallel Monte Carlo study of MSE convergence for the three transceivers.

Each replication draws from its own counter-based stream, keyed by the
master seed, the index of ``n`` in the grid and the trial index.  Results
are gathered in trial order, so a report depends only on its config and
not on how many worker processes ran it.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimators import THETA_HI, THETA_LO, two_stage_estimate
from .exceptions import DomainError, ReceiverExistenceError
from .fisher import maximize_opa_gain, qfi_coherent, qfi_tmsv
from .gaussian import Scenario
from .receiver import sld_params
from .sampling import AliasTable, sample_geometric, sample_homodyne, sample_pair

__all__ = [
    "RECEIVERS",
    "E_TWO_STAGE",
    "ExperimentConfig",
    "ConvergenceRow",
    "ConvergenceReport",
    "default_n_grid",
    "trial_rng",
    "run_mse_experiment",
    "reference_lines",
    "sample_homodyne",
    "sample_geometric",
    "sample_pair",
    "AliasTable",
]

RECEIVERS = ("coherent", "opa", "tmsv", "opa-oracle", "tmsv-oracle")
# Two-stage penalty used for the adjusted reference line.
E_TWO_STAGE = 0.05
FLAG_NAMES = ("clamped", "receiver_fallback", "likelihood_boundary", "truncation_floor")
_CHUNK = 64


def default_n_grid(points=24, n_min=16, n_max=16384):
    """Log-spaced, strictly increasing integer probe counts."""
    grid = np.unique(np.round(np.geomspace(n_min, n_max, points)).astype(int))
    return tuple(int(v) for v in grid)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one MSE-convergence study.

    ``cutoff`` is the per-detector photon-number resolution for the TMSV
    receiver; it is raised per trial if more than ``max_deficit`` of the
    pair distribution falls beyond it.  ``threads`` is the number of
    worker processes and never changes the result.
    """

    scenario: Scenario = Scenario(0.5, 0.01, 1.0)
    receiver: str = "tmsv"
    n_grid: tuple = field(default_factory=default_n_grid)
    trials: int = 5000
    seed: int = 20240601
    beta: float = 0.5
    cutoff: int = 9
    max_deficit: float = 1e-2
    threads: int = 1
    homodyne_convention: str = "fisher"
    theta_lo: float = THETA_LO
    theta_hi: float = THETA_HI

    def __post_init__(self):
        if self.receiver not in RECEIVERS:
            raise DomainError(f"receiver must be one of {RECEIVERS}, got {self.receiver!r}")
        grid = tuple(int(v) for v in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("n grid must be non-empty and strictly increasing")
        if grid[0] < 4:
            raise DomainError("every n must be >= 4")
        object.__setattr__(self, "n_grid", grid)
        if int(self.trials) < 1:
            raise DomainError("trials must be >= 1")
        if int(self.threads) < 1:
            raise DomainError("threads must be >= 1")
        if not 0 < self.beta < 1:
            raise DomainError("beta must lie in (0, 1)")
        if int(self.cutoff) < 1:
            raise DomainError("cutoff must be >= 1")

    @property
    def kind(self):
        return self.receiver.split("-")[0]

    @property
    def oracle(self):
        return self.receiver.endswith("-oracle")

    def to_dict(self):
        d = asdict(self)
        d["scenario"] = asdict(self.scenario)
        d["n_grid"] = list(self.n_grid)
        return d


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    mse: float
    c_theta: float
    ci95: float | None
    flag_rates: dict


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-``n`` results plus reference lines.

    ``ci95`` is the half-width of a normal-approximation 95% interval on
    the MSE (``None`` for a single trial).  ``partial`` marks a run cut
    short by an interrupt.
    """

    config: ExperimentConfig
    rows: tuple
    reference: dict
    partial: bool = False

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "rows": [asdict(r) for r in self.rows],
            "reference": dict(self.reference),
            "partial": self.partial,
        }


def reference_lines(s):
    """Inverse per-probe Fisher information for each receiver, with the
    two-stage adjusted lines ``(1 + E_TWO_STAGE) / J``."""
    ref = {"coherent": 1.0 / qfi_coherent(s)}
    opa = maximize_opa_gain(s).fi
    if opa > 0:
        ref["opa"] = 1.0 / opa
        ref["opa_two_stage"] = (1.0 + E_TWO_STAGE) / opa
    J = qfi_tmsv(s)
    if J > 0:
        ref["tmsv"] = 1.0 / J
        ref["tmsv_two_stage"] = (1.0 + E_TWO_STAGE) / J
    return ref


def trial_rng(seed, n_index, trial):
    """Independent Philox stream for one replication."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(n_index), int(trial)))
    return np.random.Generator(np.random.Philox(ss))


def _run_chunk(cfg, n_index, start, stop):
    n = cfg.n_grid[n_index]
    theta = cfg.scenario.theta
    out = np.empty((stop - start, 1 + len(FLAG_NAMES)))
    for j, trial in enumerate(range(start, stop)):
        res = two_stage_estimate(
            cfg.kind,
            n,
            cfg.scenario,
            trial_rng(cfg.seed, n_index, trial),
            beta=cfg.beta,
            cutoff=cfg.cutoff,
            oracle=cfg.oracle,
            theta_lo=cfg.theta_lo,
            theta_hi=cfg.theta_hi,
            homodyne_convention=cfg.homodyne_convention,
            max_deficit=cfg.max_deficit,
        )
        out[j, 0] = (res.theta_hat - theta) ** 2
        out[j, 1:] = [getattr(res, name) for name in FLAG_NAMES]
    return out


def _row(n, block):
    sq = block[:, 0]
    mse = float(np.mean(sq))
    trials = sq.size
    ci = None if trials == 1 else float(1.96 * np.std(sq, ddof=1) / math.sqrt(trials))
    rates = {name: float(np.mean(block[:, 1 + i])) for i, name in enumerate(FLAG_NAMES)}
    return ConvergenceRow(int(n), mse, n * mse, ci, rates)


def _tasks(cfg, n_index):
    return [
        (cfg, n_index, a, min(a + _CHUNK, cfg.trials)) for a in range(0, cfg.trials, _CHUNK)
    ]


def run_mse_experiment(cfg, progress=None):
    """Run ``cfg.trials`` replications at every ``n`` and summarize.

    ``progress`` is called as ``progress(n, row)`` after each grid point.
    On ``KeyboardInterrupt`` the completed rows are returned with
    ``partial=True``.
    """
    s = cfg.scenario
    if cfg.kind == "tmsv" and not sld_params(s).exists:
        raise ReceiverExistenceError(s, sld_params(s).discriminant)
    rows = []
    partial = False
    pool = ProcessPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for i, n in enumerate(cfg.n_grid):
            tasks = _tasks(cfg, i)
            if pool is None:
                parts = [_run_chunk(*t) for t in tasks]
            else:
                parts = list(pool.map(_run_chunk, *zip(*tasks)))
            row = _row(n, np.concatenate(parts))
            rows.append(row)
            if progress is not None:
                progress(n, row)
    except KeyboardInterrupt:
        partial = True
    finally:
        if pool is not None:
            pool.shutdown(wait=not partial, cancel_futures=partial)
    return ConvergenceReport(cfg, tuple(rows), reference_lines(s), partial)
