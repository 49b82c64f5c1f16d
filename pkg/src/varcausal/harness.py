"""End-to-end simulation study: sample, fit, score, bound, bucket, export.

Four modes share one per-process pipeline (sample a stable process, simulate
train/test paths, fit, compute risks and bounds):

* ``standard``     - matched or explicitly misspecified orders, one record
                     per (process, estimator),
* ``sampleSweep``  - the same study across training sizes, summarized by
                     distribution quantiles of |G - S|,
* ``omegaSweep``   - matched processes scored at several horizons under two
                     intervention regimes (most recent step only / every
                     window step),
* ``confounded``   - a bivariate process observed through one coordinate,
                     fit as a scalar model; bounds are evaluated with
                     empirical inputs and violations are counted, not hidden.

Everything is a pure function of the config (including the master seed):
per-process generators are derived by counter-based splitting, so thread
scheduling cannot change any output byte.
"""

from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import seeding
from .bounds import (
    admissible_block_scheme,
    autocorrelation,
    condition_number,
    cor2_bound,
    prop1_bound,
    thm1_bound,
)
from .errors import ConfigError, NumericalError
from .estimators import ESTIMATORS, OLS, build_design, fit_cv, fit_ols
from .interventions import InterventionSpec, marginal_variances
from .process import (
    SamplePath,
    VarModel,
    empirical_autocov,
    exact_autocov,
    rejection_sample_stable,
    simulate,
    _psd_sqrt,
)
from .risk import (
    ModelPair,
    causal_risk,
    empirical_stat_risk,
    mc_causal_risk,
    stat_risk,
    _forward,
)
from .seeding import derive_rng

MODES = ("standard", "sampleSweep", "omegaSweep", "confounded")

RECORD_FIELDS = (
    "process_id",
    "order_true",
    "order_fit",
    "estimator",
    "regime",
    "kappa",
    "delta_true",
    "delta_fit",
    "coeffs_true",
    "coeffs_fit",
    "s_analytic",
    "s_empirical",
    "g_analytic",
    "g_mc",
    "abs_diff",
    "prop1_rhs",
    "cor2_rhs",
    "thm1_rhs",
    "omega",
    "n_train",
)

SUMMARY_FIELDS = ("kappa_mid", "max_diff", "mean_diff", "q90_diff", "bound", "count")

SWEEP_FIELDS = ("n_train", "q0", "q25", "q50", "q75", "q100", "mean", "std", "count")


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration of a simulation run; all fields have spec defaults."""

    n_processes: int = 10_000
    orders: tuple[int, ...] = (3, 5, 7)
    coeff_lo: float = -2.0
    coeff_hi: float = 2.0
    n_train: int = 100
    n_test: int = 1000
    omega: int = 1
    estimators: tuple[str, ...] = (OLS,)
    bucket_size: int = 500
    master_seed: int = 0
    mode: str = "standard"
    noise_variance: float = 1.0
    mc_draws: int = 1000
    order_pairs: tuple[tuple[int, int], ...] = ()
    sweep_train_sizes: tuple[int, ...] = (10, 100, 1000)
    sweep_omegas: tuple[int, ...] = (1, 5, 7)
    rho: float | None = None
    confidence: float = 0.1
    rademacher_draws: int = 128
    cv_folds: int = 5
    threads: int = 1
    max_tries: int = 200_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.n_processes < 1:
            raise ConfigError("n_processes must be positive")
        if not self.orders:
            raise ConfigError("orders must be non-empty")
        if any(p < 1 for p in self.orders):
            raise ConfigError("orders must be positive")
        if self.coeff_lo >= self.coeff_hi:
            raise ConfigError("need coeff_lo < coeff_hi")
        if self.bucket_size < 1:
            raise ConfigError("bucket_size must be positive")
        for est in self.estimators:
            if est not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {est!r}")
        if self.omega < 1 or any(w < 1 for w in self.sweep_omegas):
            raise ConfigError("omega values must be positive")

    def to_mapping(self) -> dict:
        out = asdict(self)
        out["orders"] = list(self.orders)
        out["estimators"] = list(self.estimators)
        out["order_pairs"] = [list(pq) for pq in self.order_pairs]
        out["sweep_train_sizes"] = list(self.sweep_train_sizes)
        out["sweep_omegas"] = list(self.sweep_omegas)
        return out

    @staticmethod
    def from_mapping(mapping: dict) -> "ExperimentConfig":
        known = {f: None for f in ExperimentConfig.__dataclass_fields__}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = value
        for tup_key in ("orders", "estimators", "sweep_train_sizes", "sweep_omegas"):
            if tup_key in kwargs and not isinstance(kwargs[tup_key], tuple):
                value = kwargs[tup_key]
                # A bare scalar (one order, one estimator) means a 1-tuple.
                kwargs[tup_key] = tuple(value) if isinstance(value, (list, set)) else (value,)
        if "order_pairs" in kwargs:
            try:
                kwargs["order_pairs"] = tuple(tuple(pq) for pq in kwargs["order_pairs"])
            except TypeError as exc:
                raise ConfigError(f"order_pairs must be a list of (p, q) pairs: {exc}") from exc
        try:
            return ExperimentConfig(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


@dataclass(frozen=True)
class ExperimentRecord:
    """One (process, estimator, horizon, regime) cell of the study."""

    process_id: int
    order_true: int
    order_fit: int
    estimator: str
    regime: str
    kappa: float
    delta_true: float
    delta_fit: float
    coeffs_true: tuple[float, ...]
    coeffs_fit: tuple[float, ...]
    s_analytic: float
    s_empirical: float
    g_analytic: float
    g_mc: float
    abs_diff: float
    prop1_rhs: float
    cor2_rhs: float
    thm1_rhs: float
    omega: int
    n_train: int


@dataclass(frozen=True)
class BucketSummary:
    """Statistics of |G - S| over one condition-number bucket."""

    kappa_mid: float
    max_diff: float
    mean_diff: float
    q90_diff: float
    bound: float
    count: int


@dataclass(frozen=True)
class SweepSummary:
    """Distribution summary of |G - S| for one training size."""

    n_train: int
    q0: float
    q25: float
    q50: float
    q75: float
    q100: float
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class RunResult:
    records: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Shared per-process pipeline
# ---------------------------------------------------------------------------


def _sample_and_paths(cfg: ExperimentConfig, pid: int, q_true: int, d: int = 1):
    truth = rejection_sample_stable(
        q_true,
        d,
        cfg.coeff_lo,
        cfg.coeff_hi,
        derive_rng(cfg.master_seed, pid, seeding.STAGE_TRUTH),
        max_tries=cfg.max_tries,
        noise_variance=cfg.noise_variance,
    )
    train = simulate(
        truth, cfg.n_train, derive_rng(cfg.master_seed, pid, seeding.STAGE_TRAIN),
        init="stationary",
    )
    test = simulate(
        truth, cfg.n_test, derive_rng(cfg.master_seed, pid, seeding.STAGE_TEST),
        init="stationary",
    )
    return truth, train, test


def _fit(cfg: ExperimentConfig, train: SamplePath, p_fit: int, estimator: str):
    if estimator == OLS:
        return fit_ols(build_design(train, p_fit))
    folds = max(2, min(cfg.cv_folds, train.n - p_fit))
    return fit_cv(train, p_fit, estimator, folds=folds)


def _thm1_rhs(
    cfg: ExperimentConfig,
    pid: int,
    fitted: VarModel,
    train: SamplePath,
    omega: int,
    kappa: float,
    rho: float,
    g_analytic: float,
) -> float:
    scheme = admissible_block_scheme(train.n, rho, cfg.confidence)
    try:
        report = thm1_bound(
            fitted,
            train,
            scheme,
            omega,
            1,
            kappa=max(kappa, 1.0),
            m_trunc=None,
            rho=rho,
            confidence=cfg.confidence,
            draws=cfg.rademacher_draws,
            seed=derive_rng(cfg.master_seed, pid, seeding.STAGE_RADEMACHER),
            lhs=g_analytic if math.isfinite(g_analytic) else None,
        )
        return report.value
    except NumericalError:
        # The default scheme can be inadmissible for this rho and confidence.
        return math.nan


def _standard_record(
    cfg: ExperimentConfig,
    pid: int,
    q_true: int,
    p_fit: int,
    estimator: str,
    omega: int,
    regime: str = "single",
    precomputed=None,
) -> ExperimentRecord:
    truth, train, test, fit = precomputed or (None, None, None, None)
    if truth is None:
        truth, train, test = _sample_and_paths(cfg, pid, q_true)
        fit = _fit(cfg, train, p_fit, estimator)

    pair = ModelPair(truth=truth, fitted=fit.model)
    nu = pair.nu
    corr = autocorrelation(pair.autocov())
    kappa = condition_number(corr)
    lags = (0,) if regime == "single" else tuple(range(nu))
    spec = InterventionSpec.averaged(omega, components=(1,), time_lags=lags)

    s_an = float(stat_risk(pair, omega).sum())
    g_an = float(causal_risk(pair, spec).sum())
    s_emp = empirical_stat_risk(fit.model, test, omega)
    if cfg.mc_draws > 0:
        g_mc, _ = mc_causal_risk(
            pair, spec, cfg.mc_draws, derive_rng(cfg.master_seed, pid, seeding.STAGE_MC)
        )
    else:
        g_mc = math.nan

    delta_true = _max_modulus(truth)
    delta_fit = _max_modulus(fit.model)
    kappa_cov = condition_number(pair.autocov())
    prop1 = prop1_bound(pair, omega).value
    cor2 = cor2_bound(pair, omega).value
    rho = cfg.rho if cfg.rho is not None else min(max(delta_true, 0.01), 0.999)
    thm1 = _thm1_rhs(cfg, pid, fit.model, train, omega, kappa_cov, rho, g_an)

    return ExperimentRecord(
        process_id=pid,
        order_true=q_true,
        order_fit=p_fit,
        estimator=estimator,
        regime=regime,
        kappa=kappa,
        delta_true=delta_true,
        delta_fit=delta_fit,
        coeffs_true=tuple(float(v) for v in truth.scalar_coeffs),
        coeffs_fit=tuple(float(v) for v in fit.model.scalar_coeffs),
        s_analytic=s_an,
        s_empirical=s_emp,
        g_analytic=g_an,
        g_mc=g_mc,
        abs_diff=abs(g_an - s_an),
        prop1_rhs=prop1,
        cor2_rhs=cor2,
        thm1_rhs=thm1,
        omega=omega,
        n_train=cfg.n_train,
    )


def _max_modulus(model: VarModel) -> float:
    from .companion import build_companion, spectrum

    return spectrum(build_companion(model.coeffs)).max_modulus


def _run_items(cfg: ExperimentConfig, items, worker):
    """Run work items through a bounded pool; order of results is by item."""
    if cfg.threads <= 1:
        return [worker(it) for it in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(worker, items))


# ---------------------------------------------------------------------------
# Modes
# ---------------------------------------------------------------------------


def run_standard(cfg: ExperimentConfig) -> RunResult:
    """Matched-order study (plus any explicitly misspecified pairs)."""
    started = time.monotonic()
    pairs = [(q, q) for q in cfg.orders] + [
        (int(p_fit), int(q_true)) for (p_fit, q_true) in cfg.order_pairs
    ]
    items = []
    for block, (p_fit, q_true) in enumerate(pairs):
        for i in range(cfg.n_processes):
            items.append((block * cfg.n_processes + i, q_true, p_fit))

    skipped = []

    def worker(item):
        pid, q_true, p_fit = item
        out = []
        try:
            truth, train, test = _sample_and_paths(cfg, pid, q_true)
        except NumericalError:
            skipped.append(pid)
            return out
        for estimator in cfg.estimators:
            fit = _fit(cfg, train, p_fit, estimator)
            out.append(
                _standard_record(
                    cfg, pid, q_true, p_fit, estimator, cfg.omega,
                    precomputed=(truth, train, test, fit),
                )
            )
        return out

    records = [rec for group in _run_items(cfg, items, worker) for rec in group]
    records.sort(key=lambda r: (r.process_id, r.estimator))
    summaries, dropped = bucket_by_kappa(records, cfg.bucket_size)
    meta = _metadata(cfg, records, skipped, dropped)
    _log_timing("standard", started)
    return RunResult(records=records, summaries={"standard": summaries}, metadata=meta)


def run_sample_sweep(cfg: ExperimentConfig) -> RunResult:
    """|G - S| distribution across training sizes (matched processes)."""
    started = time.monotonic()
    estimator = cfg.estimators[0]
    per_n: dict[int, list[ExperimentRecord]] = {}
    skipped: list[int] = []
    all_records: list[ExperimentRecord] = []
    for n_train in cfg.sweep_train_sizes:
        sub_cfg = replace(cfg, n_train=int(n_train))
        items = []
        for block, q in enumerate(cfg.orders):
            for i in range(cfg.n_processes):
                items.append((block * cfg.n_processes + i, q))

        def worker(item, sub_cfg=sub_cfg):
            pid, q = item
            try:
                return [_standard_record(sub_cfg, pid, q, q, estimator, sub_cfg.omega)]
            except NumericalError:
                skipped.append(pid)
                return []

        recs = [r for group in _run_items(cfg, items, worker) for r in group]
        recs.sort(key=lambda r: (r.process_id, r.estimator))
        per_n[int(n_train)] = recs
        all_records.extend(recs)

    summaries = {
        f"n{n_train}": [_sweep_summary(n_train, recs)] for n_train, recs in per_n.items()
    }
    meta = _metadata(cfg, all_records, skipped, 0)
    _log_timing("sampleSweep", started)
    return RunResult(records=all_records, summaries=summaries, metadata=meta)


def _sweep_summary(n_train: int, records) -> SweepSummary:
    diffs = np.array([r.abs_diff for r in records]) if records else np.array([0.0])
    qs = np.quantile(diffs, [0.0, 0.25, 0.5, 0.75, 1.0])
    return SweepSummary(
        n_train=int(n_train),
        q0=float(qs[0]),
        q25=float(qs[1]),
        q50=float(qs[2]),
        q75=float(qs[3]),
        q100=float(qs[4]),
        mean=float(diffs.mean()),
        std=float(diffs.std()),
        count=len(records),
    )


def run_omega_sweep(cfg: ExperimentConfig) -> RunResult:
    """Horizon sweep on matched processes under two intervention regimes."""
    started = time.monotonic()
    estimator = cfg.estimators[0]
    items = []
    for block, q in enumerate(cfg.orders):
        for i in range(cfg.n_processes):
            items.append((block * cfg.n_processes + i, q))
    skipped: list[int] = []

    def worker(item):
        pid, q = item
        out = []
        try:
            truth, train, test = _sample_and_paths(cfg, pid, q)
        except NumericalError:
            skipped.append(pid)
            return out
        fit = _fit(cfg, train, q, estimator)
        for omega in cfg.sweep_omegas:
            for regime in ("single", "all"):
                out.append(
                    _standard_record(
                        cfg, pid, q, q, estimator, omega, regime=regime,
                        precomputed=(truth, train, test, fit),
                    )
                )
        return out

    records = [rec for group in _run_items(cfg, items, worker) for rec in group]
    records.sort(key=lambda r: (r.process_id, r.omega, r.regime))
    summaries = {}
    dropped = 0
    for omega in cfg.sweep_omegas:
        for regime in ("single", "all"):
            sub = [r for r in records if r.omega == omega and r.regime == regime]
            summ, dropped = bucket_by_kappa(sub, cfg.bucket_size)
            summaries[f"omega{omega}_{regime}"] = summ
    meta = _metadata(cfg, records, skipped, dropped)
    _log_timing("omegaSweep", started)
    return RunResult(records=records, summaries=summaries, metadata=meta)


def run_confounded(cfg: ExperimentConfig) -> RunResult:
    """Hidden-confounder study: bivariate first-order truth, scalar fit.

    Only the first coordinate is observed.  The condition number is estimated
    from the observed test sample, the causal risk by do-simulation on the
    full bivariate truth, and the bounds are evaluated with these empirical
    inputs; their violations are counted in the metadata.
    """
    started = time.monotonic()
    estimator = cfg.estimators[0]
    p_fit = cfg.orders[0]
    items = list(range(cfg.n_processes))
    skipped: list[int] = []

    def worker(pid):
        try:
            truth, train2, test2 = _sample_and_paths(cfg, pid, 1, d=2)
        except NumericalError:
            skipped.append(pid)
            return []
        train = SamplePath(values=train2.values[:, :1].copy(), seed=train2.seed, burn_in=0)
        test = SamplePath(values=test2.values[:, :1].copy(), seed=test2.seed, burn_in=0)
        fit = _fit(cfg, train, p_fit, estimator)

        emp_cov = empirical_autocov(test, p_fit)
        kappa = condition_number(autocorrelation(emp_cov))
        s_emp = empirical_stat_risk(fit.model, test, cfg.omega)
        g_mc = _confounded_mc_risk(
            cfg, truth, fit.model, p_fit,
            derive_rng(cfg.master_seed, pid, seeding.STAGE_MC),
        )
        diff = abs(g_mc - s_emp)
        sigma2_hat = fit.model.noise_variance
        prop1 = (2.0 * kappa - 1.0) * max(s_emp - sigma2_hat, 0.0)
        delta_true = _max_modulus(truth)
        rho = cfg.rho if cfg.rho is not None else min(max(delta_true, 0.01), 0.999)
        thm1 = _thm1_rhs(cfg, pid, fit.model, train, cfg.omega, kappa, rho, g_mc)
        return [
            ExperimentRecord(
                process_id=pid,
                order_true=1,
                order_fit=p_fit,
                estimator=estimator,
                regime="confounded",
                kappa=kappa,
                delta_true=delta_true,
                delta_fit=_max_modulus(fit.model),
                coeffs_true=tuple(float(v) for v in truth.coeffs[0].ravel()),
                coeffs_fit=tuple(float(v) for v in fit.model.scalar_coeffs),
                s_analytic=math.nan,
                s_empirical=s_emp,
                g_analytic=math.nan,
                g_mc=g_mc,
                abs_diff=diff,
                prop1_rhs=prop1,
                cor2_rhs=math.nan,
                thm1_rhs=thm1,
                omega=cfg.omega,
                n_train=cfg.n_train,
            )
        ]

    records = [rec for group in _run_items(cfg, items, worker) for rec in group]
    records.sort(key=lambda r: r.process_id)
    summaries, dropped = bucket_by_kappa(records, cfg.bucket_size)
    meta = _metadata(cfg, records, skipped, dropped)
    meta["prop1_violations"] = sum(
         1 for r in records if math.isfinite(r.prop1_rhs) and r.abs_diff > r.prop1_rhs * (1 + 1e-9)
    )
    _log_timing("confounded", started)
    return RunResult(records=records, summaries={"confounded": summaries}, metadata=meta)


def _confounded_mc_risk(
    cfg: ExperimentConfig,
    truth: VarModel,
    fitted: VarModel,
    p_fit: int,
    rng: np.random.Generator,
) -> float:
    """Average causal risk of the scalar fit under do() on the observed
    coordinate of the bivariate truth, by exact-window Monte Carlo."""
    draws = max(cfg.mc_draws, 1000)
    length = max(p_fit, truth.p)
    root = _psd_sqrt(exact_autocov(truth, length).dense)
    windows = rng.standard_normal((draws, length * truth.d)) @ root.T
    marg_std = math.sqrt(marginal_variances(truth)[0])
    cut = windows.copy()
    cut[:, 0] = rng.standard_normal(draws) * marg_std  # observed coordinate, slot 0
    noise = rng.standard_normal((draws, cfg.omega, truth.d)) * math.sqrt(
        truth.noise_variance
    )
    targets = _forward(truth, cut, cfg.omega, noise)[:, 0]
    # The scalar model sees the observed coordinate of each window step.
    obs = cut[:, 0 :: truth.d][:, :p_fit]
    from .companion import build_companion, matrix_power

    weights = matrix_power(build_companion(fitted.coeffs).dense, cfg.omega)[0]
    preds = obs @ weights
    return float(((targets - preds) ** 2).mean())


# ---------------------------------------------------------------------------
# Bucketing and export
# ---------------------------------------------------------------------------


def bucket_by_kappa(
    records, bucket_size: int, bound_field: str = "thm1_rhs"
) -> tuple[list[BucketSummary], int]:
    """Sort by condition number, bucket, and summarize |G - S| per bucket.

    Only full buckets are kept; the dropped tail count is returned alongside.
    The bound column is the per-bucket maximum of ``bound_field``.
    """
    if not records:
        return [], 0
    ordered = sorted(records, key=lambda r: (r.kappa, r.process_id, r.estimator))
    n_buckets = len(ordered) // bucket_size
    out = []
    for b in range(n_buckets):
        chunk = ordered[b * bucket_size : (b + 1) * bucket_size]
        diffs = np.array([r.abs_diff for r in chunk])
        kappas = np.array([r.kappa for r in chunk])
        bounds = np.array([getattr(r, bound_field) for r in chunk])
        finite = bounds[np.isfinite(bounds)]
        bound = float(bounds.max()) if finite.size == bounds.size else math.inf
        out.append(
            BucketSummary(
                kappa_mid=float(np.median(kappas)),
                max_diff=float(diffs.max()),
                mean_diff=float(diffs.mean()),
                q90_diff=float(np.quantile(diffs, 0.9)),
                bound=bound,
                count=len(chunk),
            )
        )
    return out, len(ordered) - n_buckets * bucket_size


def _metadata(cfg: ExperimentConfig, records, skipped, bucket_dropped) -> dict:
    prop1_viol = sum(
        1
        for r in records
        if math.isfinite(r.prop1_rhs)
        and math.isfinite(r.abs_diff)
        and r.abs_diff > r.prop1_rhs + 1e-9 * (1.0 + abs(r.prop1_rhs))
    )
    thm1_viol = sum(
        1
        for r in records
        if math.isfinite(r.thm1_rhs)
        and math.isfinite(r.g_analytic)
        and r.g_analytic > r.thm1_rhs + 1e-9 * (1.0 + abs(r.thm1_rhs))
    )
    return {
        "config": cfg.to_mapping(),
        "n_records": len(records),
        "skipped": len(skipped),
        "bucket_dropped_tail": int(bucket_dropped),
        "prop1_violations": prop1_viol,
        "thm1_violations": thm1_viol,
    }


def _log_timing(mode: str, started: float) -> None:
    # Wall time goes to stderr, not into the metadata: outputs must be
    # byte-identical across reruns of the same config and seed.
    print(f"[varcausal] {mode} run finished in {time.monotonic() - started:.1f}s", file=sys.stderr)


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ";".join(repr(float(v)) for v in value)
    return str(value)


def records_to_csv(records) -> str:
    lines = [",".join(RECORD_FIELDS)]
    for r in records:
        lines.append(",".join(_format_value(getattr(r, f)) for f in RECORD_FIELDS))
    return "\n".join(lines) + "\n"


def summaries_to_csv(summaries: list[BucketSummary]) -> str:
    lines = [",".join(SUMMARY_FIELDS)]
    for s in summaries:
        lines.append(",".join(_format_value(getattr(s, f)) for f in SUMMARY_FIELDS))
    return "\n".join(lines) + "\n"


def sweep_to_csv(summaries: list[SweepSummary]) -> str:
    lines = [",".join(SWEEP_FIELDS)]
    for s in summaries:
        lines.append(",".join(_format_value(getattr(s, f)) for f in SWEEP_FIELDS))
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig) -> RunResult:
    """Dispatch on the configured mode."""
    if cfg.mode == "standard":
        return run_standard(cfg)
    if cfg.mode == "sampleSweep":
        return run_sample_sweep(cfg)
    if cfg.mode == "omegaSweep":
        return run_omega_sweep(cfg)
    return run_confounded(cfg)
