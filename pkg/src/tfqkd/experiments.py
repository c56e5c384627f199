"""Sweep front end: configuration parsing, loss grids, CSV output.

A sweep optimizes each requested strategy at every point of a total-loss
grid with a fixed channel mismatch, and writes one CSV row per
(loss, strategy).  A QBER scan reproduces the two diagnostic curves of
the channel model: the X-basis error rate versus signal asymmetry (full
expression and first-order approximation) and the LP-bounded phase-error
rate versus decoy asymmetry.

Configurations are single JSON documents with snake_case fields; unknown
fields are rejected so experiment records stay unambiguous.  Output files
are byte-identical for identical configurations: rows are emitted in
configuration order regardless of worker scheduling, floats are written
with shortest round-trip formatting, and the header carries the tool
version and a hash of the configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields as dataclass_fields

from . import __version__
from .channel import (
    ArrivingIntensities,
    ChannelScenario,
    first_order_diagnostics,
    x_basis_gain,
    x_basis_qber,
)
from .decoy import build_problem, observations_from_scenario, sigma_multiplier_from_epsilon, solve_yield_bounds
from .errors import ConfigError, DomainError
from .optimizer import (
    EvaluationMode,
    Strategy,
    add_fibre_transform,
    optimize_strategy,
)
from .security import YieldBounds, cat_coefficients, phase_error_upper_bound

STRATEGY_ORDER = (
    Strategy.SYMMETRIC,
    Strategy.ADD_FIBRE,
    Strategy.SIGNAL_ONLY,
    Strategy.FULLY_ASYMMETRIC,
)


def split_total_loss(total_loss_db: float, mismatch_ratio: float) -> tuple[float, float]:
    """Transmittances (eta_a, eta_b) for a total loss and a fixed ratio.

    Solves eta_a * eta_b = 10^(-L/10) with eta_a = x * eta_b, so
    eta_b = 10^(-L/20) / sqrt(x).  If that exceeds 1 the B side is capped
    and the excess loss lands entirely on the A side.
    """
    if total_loss_db < 0.0:
        raise DomainError(f"total loss must be nonnegative, got {total_loss_db}")
    if not (0.0 < mismatch_ratio <= 1.0):
        raise DomainError(f"mismatch ratio must lie in (0, 1], got {mismatch_ratio}")
    eta_total = 10.0 ** (-total_loss_db / 10.0)
    eta_b = 10.0 ** (-total_loss_db / 20.0) / math.sqrt(mismatch_ratio)
    if eta_b > 1.0:
        return eta_total, 1.0
    return mismatch_ratio * eta_b, eta_b


def reference_plob_rate(total_loss_db: float) -> float:
    """Repeaterless secret-key capacity -log2(1 - eta) of the end-to-end channel.

    Optional diagnostic only; nothing in the sweep pipeline depends on it.
    """
    eta = 10.0 ** (-total_loss_db / 10.0)
    return -math.log2(1.0 - eta) if eta < 1.0 else math.inf


def _parse_config(cls, document: dict, required: tuple[str, ...]):
    if not isinstance(document, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in dataclass_fields(cls)}
    unknown = sorted(set(document) - known)
    if unknown:
        raise ConfigError(f"unknown configuration field(s): {', '.join(unknown)}")
    missing = sorted(set(required) - set(document))
    if missing:
        raise ConfigError(f"missing configuration field(s): {', '.join(missing)}")
    try:
        return cls(**document)
    except (DomainError, TypeError, ValueError) as error:
        raise ConfigError(str(error)) from None


@dataclass(frozen=True)
class SweepConfig:
    """Strategy-comparison sweep over a total-loss grid."""

    total_loss_db_grid: tuple[float, ...]
    mismatch_ratio: float
    p_d: float = 1e-8
    e_d: float = 0.02
    phi: float = 0.0
    mode: str = "asymptotic"
    n_pulses: float = 1e12
    epsilon: float = 1e-7
    sigma_multiplier: float | None = None
    strategies: tuple[str, ...] = tuple(s.value for s in STRATEGY_ORDER)
    n_starts: int = 4
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "total_loss_db_grid", tuple(float(v) for v in self.total_loss_db_grid))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if len(self.total_loss_db_grid) == 0:
            raise ConfigError("total_loss_db_grid must not be empty")
        if any(v < 0.0 for v in self.total_loss_db_grid):
            raise ConfigError("total_loss_db_grid entries must be nonnegative")
        if not (0.0 < self.mismatch_ratio <= 1.0):
            raise ConfigError(f"mismatch_ratio must lie in (0, 1], got {self.mismatch_ratio}")
        if self.mode not in ("asymptotic", "finite"):
            raise ConfigError(f"mode must be 'asymptotic' or 'finite', got {self.mode!r}")
        if self.n_pulses <= 0.0:
            raise ConfigError(f"n_pulses must be positive, got {self.n_pulses}")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.sigma_multiplier is not None and self.sigma_multiplier <= 0.0:
            raise ConfigError(f"sigma_multiplier must be positive, got {self.sigma_multiplier}")
        if len(self.strategies) == 0:
            raise ConfigError("strategies must not be empty")
        valid = {s.value for s in Strategy}
        for name in self.strategies:
            if name not in valid:
                raise ConfigError(f"unknown strategy {name!r}; valid: {sorted(valid)}")
        if self.n_starts < 1:
            raise ConfigError(f"n_starts must be at least 1, got {self.n_starts}")

    @classmethod
    def from_dict(cls, document: dict) -> "SweepConfig":
        return _parse_config(cls, document, required=("total_loss_db_grid", "mismatch_ratio"))

    def evaluation_mode(self) -> EvaluationMode:
        if self.mode == "asymptotic":
            return EvaluationMode.asymptotic()
        sigma = self.sigma_multiplier
        if sigma is None:
            sigma = sigma_multiplier_from_epsilon(self.epsilon)
        return EvaluationMode.finite(self.n_pulses, sigma)

    def scenario_for(self, total_loss_db: float) -> ChannelScenario:
        eta_a, eta_b = split_total_loss(total_loss_db, self.mismatch_ratio)
        return ChannelScenario(eta_a=eta_a, eta_b=eta_b, p_d=self.p_d, e_d=self.e_d, phi=self.phi)

    def ordered_strategies(self) -> tuple[Strategy, ...]:
        requested = set(self.strategies)
        return tuple(s for s in STRATEGY_ORDER if s.value in requested)


@dataclass(frozen=True)
class QberScanConfig:
    """Error-rate diagnostics versus intensity asymmetry.

    The scan grid serves as the A-side signal intensity for the X-basis
    columns and as the A-side strong decoy for the LP-bounded phase-error
    column, against fixed B-side values; transmittances are unity, dark
    counts and phase mismatch zero (interference-limited setting).
    """

    s_a_grid: tuple[float, ...]
    s_b: float = 0.1
    mu_b: float = 0.1
    nu: float = 0.01
    e_d: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, "s_a_grid", tuple(float(v) for v in self.s_a_grid))
        if len(self.s_a_grid) == 0:
            raise ConfigError("s_a_grid must not be empty")
        if any(v <= 0.0 for v in self.s_a_grid):
            raise ConfigError("s_a_grid entries must be positive")
        if self.s_b <= 0.0 or self.mu_b <= 0.0:
            raise ConfigError("s_b and mu_b must be positive")
        if not (0.0 < self.nu <= self.mu_b):
            raise ConfigError(f"nu must lie in (0, mu_b], got {self.nu}")
        if not (0.0 <= self.e_d < 1.0):
            raise ConfigError(f"e_d must lie in [0, 1), got {self.e_d}")

    @classmethod
    def from_dict(cls, document: dict) -> "QberScanConfig":
        return _parse_config(cls, document, required=("s_a_grid",))

    def scenario(self) -> ChannelScenario:
        return ChannelScenario(eta_a=1.0, eta_b=1.0, p_d=0.0, e_d=self.e_d, phi=0.0)


@dataclass(frozen=True)
class SweepRow:
    loss_db: float
    strategy: str
    key_rate: float
    key_rate_raw: float
    s_a: float
    s_b: float
    mu_a: float | None
    nu_a: float | None
    mu_b: float | None
    nu_b: float | None
    p_s_a: float | None
    p_mu_a: float | None
    p_nu_a: float | None
    p_s_b: float | None
    p_mu_b: float | None
    p_nu_b: float | None
    e_xx: float
    e_zz_upper: float
    p_xx: float


SWEEP_COLUMNS = tuple(f.name for f in dataclass_fields(SweepRow))


def _sweep_job(config: SweepConfig, loss_db: float, strategy_name: str) -> tuple[SweepRow, str | None]:
    strategy = Strategy(strategy_name)
    scenario = config.scenario_for(loss_db)
    mode = config.evaluation_mode()
    result = optimize_strategy(scenario, strategy, mode, n_starts=config.n_starts, seed=config.seed)
    params, report = result.params, result.report
    finite = mode.is_finite
    row = SweepRow(
        loss_db=loss_db,
        strategy=strategy.value,
        key_rate=report.rate,
        key_rate_raw=report.rate_raw,
        s_a=params.s_a,
        s_b=params.s_b,
        mu_a=params.mu_a if finite else None,
        nu_a=params.nu_a if finite else None,
        mu_b=params.mu_b if finite else None,
        nu_b=params.nu_b if finite else None,
        p_s_a=params.p_s_a if finite else None,
        p_mu_a=params.p_mu_a if finite else None,
        p_nu_a=params.p_nu_a if finite else None,
        p_s_b=params.p_s_b if finite else None,
        p_mu_b=params.p_mu_b if finite else None,
        p_nu_b=params.p_nu_b if finite else None,
        e_xx=report.e_xx,
        e_zz_upper=report.e_zz_upper,
        p_xx=report.p_xx,
    )
    dump = None
    if finite:
        obs = observations_from_scenario(
            scenario if strategy is not Strategy.ADD_FIBRE else add_fibre_transform(scenario),
            (params.mu_a, params.nu_a, params.omega_a),
            (params.mu_b, params.nu_b, params.omega_b),
            n_pulses=mode.n_pulses,
            probabilities_a=(params.p_mu_a, params.p_nu_a, params.p_omega_a),
            probabilities_b=(params.p_mu_b, params.p_nu_b, params.p_omega_b),
        )
        dump = build_problem(obs, finite_size=True, sigma_multiplier=mode.sigma_multiplier).to_text()
    return row, dump


def run_sweep(config: SweepConfig, workers: int = 1, collect_lp_dumps: bool = False):
    """One optimized row per (loss, strategy), in configuration order.

    Sweep points are independent jobs; with workers > 1 they run on a
    process pool and are reassembled in order, so the result (and any CSV
    written from it) does not depend on scheduling.  Returns the rows, or
    (rows, dumps) when LP dumps are requested.
    """
    jobs = [
        (loss, strategy.value)
        for loss in config.total_loss_db_grid
        for strategy in config.ordered_strategies()
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_job, [config] * len(jobs),
                                     [j[0] for j in jobs], [j[1] for j in jobs]))
    else:
        outcomes = [_sweep_job(config, loss, name) for loss, name in jobs]
    rows = [row for row, _ in outcomes]
    if collect_lp_dumps:
        dumps = {
            (row.loss_db, row.strategy): dump
            for (row, dump) in outcomes
            if dump is not None
        }
        return rows, dumps
    return rows


@dataclass(frozen=True)
class QberScanRow:
    ratio: float
    e_xx_full: float
    e_xx_first_order: float
    e_zz_upper: float


QBER_SCAN_COLUMNS = tuple(f.name for f in dataclass_fields(QberScanRow))


def run_qber_scan(config: QberScanConfig):
    """Error rates versus the asymmetry of arriving intensities.

    For each scan value v the X-basis columns use signal intensities
    (v, s_b), and the phase-error column bounds the yields by LP from the
    decoy sets {v, nu, 0} versus {mu_b, nu, 0} with signal states fixed at
    (s_b, s_b) for the cat-state weights.
    """
    scenario = config.scenario()
    cat = cat_coefficients(math.sqrt(config.s_b))
    gamma_signal = ArrivingIntensities.from_sources(scenario, config.s_b, config.s_b)
    p_xx_signal = x_basis_gain(scenario, gamma_signal)
    rows = []
    for value in config.s_a_grid:
        gamma = ArrivingIntensities.from_sources(scenario, value, config.s_b)
        e_full = x_basis_qber(scenario, gamma)
        e_first = first_order_diagnostics(scenario, gamma).e_xx_approx
        # the decoy set is a set: a scan value below nu simply swaps roles
        strong, weak = (value, config.nu) if value >= config.nu else (config.nu, value)
        obs = observations_from_scenario(
            scenario, (strong, weak, 0.0), (config.mu_b, config.nu, 0.0),
        )
        bounds = solve_yield_bounds(build_problem(obs))
        yields = YieldBounds(
            u00=bounds[(0, 0)], u20=bounds[(2, 0)], u02=bounds[(0, 2)],
            u11=bounds[(1, 1)], u22=bounds[(2, 2)],
        )
        e_zz = phase_error_upper_bound(p_xx_signal, cat, cat, yields)
        rows.append(QberScanRow(
            ratio=value / config.s_b,
            e_xx_full=e_full,
            e_xx_first_order=e_first,
            e_zz_upper=e_zz,
        ))
    return rows


def config_digest(document: dict) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):  # covers numpy scalars; repr of the plain float round-trips
        return repr(float(value))
    return str(value)


def write_csv(path: str, columns: tuple[str, ...], rows, config_document: dict) -> None:
    """CSV with a commented header carrying the tool version and config hash."""
    lines = [f"# tfqkd {__version__} config_sha256={config_digest(config_document)}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_format_cell(getattr(row, c)) for c in columns))
    payload = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write(payload)


def write_lp_dumps(path: str, dumps: dict) -> None:
    """LP audit dumps, one section per sweep row, in row order."""
    sections = []
    for (loss_db, strategy) in sorted(dumps):
        sections.append(f"=== loss_db={loss_db!r} strategy={strategy} ===")
        sections.append(dumps[(loss_db, strategy)])
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(sections) + "\n")
