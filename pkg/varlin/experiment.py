"""Experiment harness running the pipeline stages over a grid of row sizes."""

import csv
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import joblib
import numpy as np
import scipy

from varlin import __version__
from varlin.config import get_config, get_messages, list_reference_models
from varlin.config.tolerance import TOLERANCE_PROFILES, apply_tolerance_profile
from varlin.diagnostics import (
    AsipResidual,
    CumulantGrowth,
    FddCheck,
    KolmogorovDistance,
    MdpCurve,
    MomentGap,
    RateFit,
    RateSeries,
    asip_residual,
    berry_esseen_normalizer,
    cumulant_growth,
    fdd_check,
    kolmogorov_to_normal,
    mdp_curve,
    moment_gap,
    rate_fit,
    write_fits_csv,
)
from varlin.errors import ConfigError, InvariantViolationError, PreconditionError, UsageError, ValidationError
from varlin.generators import ArrayModel, ModelKind, load_model_file, sample_paths
from varlin.generators.io import parse_number, parse_parameter, parse_vector, read_ini
from varlin.linearize import (
    BetaEstimate,
    BlockPartition,
    CertificationReport,
    GrowthConstants,
    constants_for_model,
    estimate_beta,
    partition_blocks,
    verify_partition,
    window_growth_check,
)
from varlin.martingale import (
    CoboundaryDecomp,
    CoupledBounds,
    LyapunovBound,
    MaximalCheck,
    PathPair,
    QuadraticVariation,
    RateBounds,
    SequentialConstants,
    block_b_terms,
    block_sums,
    build_path_pair,
    coupled_pair_bounds,
    lyapunov_bound,
    martingale_b_terms,
    martingale_differences,
    maximal_inequality_check,
    memory_coefficient,
    quadratic_variation,
    rate_bounds,
    residual_bound_check,
    sequential_constants,
    variance_transfer_gap,
    write_bounds_csv,
)
from varlin.mixing import MixingProfile, consistency_check, profile_for_model, varpi_sum
from varlin.model_factory import build_reference_model
from varlin.oracle import LatticePmf, VarianceProfile, exact_sum_pmf, oracle_for_model, variance_profile

logger = logging.getLogger(__name__)

STAGES = ("validate", "constants", "blocks", "decompose", "diagnose", "report")
DIAGNOSTICS = ("dk", "cumulants", "moments", "mdp", "qv", "fdd", "bounds", "maximal", "asip")
PLOT_IDS = (
    "dk_vs_sigma",
    "mdp_curve",
    "block_variances",
    "cumulants",
    "moment_gap",
    "quadratic_variation",
    "bounds",
)
L_RULES = ("constant", "sigma", "memory")


def _tokens(text: str) -> list[str]:
    return text.replace(",", " ").split()


@dataclass
class ExperimentConfig:
    """
    One experiment: a model, a grid of row sizes and the stages to run.

    Exactly one of ``model`` (a reference name rebuilt for every ``n``) and
    ``model_file`` (a fixed INI model, run at its own ``n``) is set.
    """

    model: str | None = "iid"
    model_file: str | None = None
    parameters: dict = field(default_factory=dict)
    n_grid: list[int] = field(default_factory=lambda: [256, 512, 1024, 2048])
    p0: float = 4.0
    l_rule: str = "constant"
    l_value: float = 1.0
    seed: int = 0
    replicates: int = 2000
    threads: int = 1
    out: str = "results"
    tolerance_profile: str = "default"
    stages: list[str] = field(default_factory=lambda: list(STAGES))
    diagnostics: list[str] = field(default_factory=lambda: ["dk", "cumulants", "moments", "mdp"])
    cumulant_orders: list[int] = field(default_factory=lambda: [3, 4])
    moment_orders: list[int] = field(default_factory=lambda: [4])
    mdp_speed_exponent: float = 0.2
    x_grid: list[float] = field(default_factory=lambda: [0.5, 1.0, 1.5])
    export_paths: int = 0
    lang: str = "en"
    verbose: bool = True

    def __post_init__(self):
        if (self.model is None) == (self.model_file is None):
            raise ConfigError("Set exactly one of model and model_file")
        if self.model is not None and self.model not in list_reference_models():
            raise ConfigError(f"Unknown reference model: {self.model}")
        if self.model_file is not None and not Path(self.model_file).is_file():
            raise ConfigError(f"Model file not found: {self.model_file}")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValidationError(f"n_grid must be non-empty and strictly increasing: {self.n_grid}")
        if self.n_grid[0] < 1:
            raise ValidationError("Row sizes must be positive")
        if self.replicates < 1:
            raise ValidationError("Replicate count must be at least 1")
        if self.threads < 1:
            raise ValidationError("Thread count must be at least 1")
        if self.p0 <= 2:
            raise ValidationError(f"p0 must exceed 2, got {self.p0}")
        if self.l_rule not in L_RULES:
            raise ConfigError(f"Unknown l_n rule {self.l_rule!r}; choose from {', '.join(L_RULES)}")
        if self.tolerance_profile not in TOLERANCE_PROFILES:
            raise UsageError(f"Unknown tolerance profile: {self.tolerance_profile}")
        unknown = [s for s in self.stages if s not in STAGES] + [d for d in self.diagnostics if d not in DIAGNOSTICS]
        if unknown:
            raise ConfigError(f"Unknown stage or diagnostic: {', '.join(unknown)}")

    @classmethod
    def from_ini(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """
        Read an experiment file.

        Example::

            [experiment]
            model = elliptic_chain
            n_grid = 256 512 1024 2048
            p0 = 4
            diagnostics = dk cumulants moments mdp qv bounds

            [parameters]
            spread = 1/20

            [rates]
            l_rule = sigma
            l_value = 1/2

            [mdp]
            speed_exponent = 1/5
            x_grid = 1/2 1 3/2
        """
        path = Path(path)
        parser = read_ini(path)
        if not parser.has_section("experiment"):
            raise ConfigError(f"{path} has no [experiment] section")
        sec = parser["experiment"]
        kwargs: dict = {}
        if "model_file" in sec:
            model_file = Path(sec["model_file"].strip())
            kwargs["model_file"] = str(model_file if model_file.is_absolute() else path.parent / model_file)
            kwargs["model"] = None
        elif "model" in sec:
            kwargs["model"] = sec["model"].strip()
        if "n_grid" in sec:
            kwargs["n_grid"] = [int(v) for v in parse_vector(sec["n_grid"])]
        for key in ("seed", "replicates", "threads", "export_paths"):
            if key in sec:
                kwargs[key] = int(parse_number(sec[key]))
        if "p0" in sec:
            kwargs["p0"] = parse_number(sec["p0"])
        for key in ("out", "tolerance_profile", "lang"):
            if key in sec:
                kwargs[key] = sec[key].strip()
        for key in ("stages", "diagnostics"):
            if key in sec:
                kwargs[key] = _tokens(sec[key])
        if parser.has_section("parameters"):
            kwargs["parameters"] = {k: parse_parameter(v) for k, v in parser["parameters"].items()}
        if parser.has_section("rates"):
            rates = parser["rates"]
            kwargs["l_rule"] = rates.get("l_rule", "constant").strip()
            kwargs["l_value"] = parse_number(rates.get("l_value", "1"))
        if parser.has_section("mdp"):
            mdp = parser["mdp"]
            if "speed_exponent" in mdp:
                kwargs["mdp_speed_exponent"] = parse_number(mdp["speed_exponent"])
            if "x_grid" in mdp:
                kwargs["x_grid"] = [float(v) for v in parse_vector(mdp["x_grid"])]
        if parser.has_section("cumulants"):
            cum = parser["cumulants"]
            if "orders" in cum:
                kwargs["cumulant_orders"] = [int(v) for v in parse_vector(cum["orders"])]
            if "moment_orders" in cum:
                kwargs["moment_orders"] = [int(v) for v in parse_vector(cum["moment_orders"])]
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        logger.debug("Experiment config from %s: %s", path, kwargs)
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return asdict(self)

    def build_model(self, n: int) -> ArrayModel:
        if self.model_file is not None:
            return load_model_file(self.model_file)
        return build_reference_model(self.model, n, **self.parameters)


def stages_for(command: str) -> list[str]:
    """Stages a subcommand runs: every stage up to and including ``command``."""
    if command not in STAGES:
        raise UsageError(f"Unknown command: {command}")
    return list(STAGES[: STAGES.index(command) + 1])


@dataclass
class SizeRecord:
    """Everything computed for one row size."""

    n: int
    model: ArrayModel
    profile: MixingProfile | None = None
    oracle: object = None
    constants: GrowthConstants | None = None
    partition: BlockPartition | None = None
    beta: BetaEstimate | None = None
    certification: CertificationReport = field(default_factory=CertificationReport)
    decomp: CoboundaryDecomp | None = None
    variances: VarianceProfile | None = None
    paths: PathPair | None = None
    qv: QuadraticVariation | None = None
    coupled: CoupledBounds | None = None
    lyapunov: LyapunovBound | None = None
    maximal: dict[str, MaximalCheck] = field(default_factory=dict)
    fdd: FddCheck | None = None
    sequential: SequentialConstants | None = None
    bounds: RateBounds | None = None
    pmf: LatticePmf | None = None
    dk: KolmogorovDistance | None = None
    mdp: MdpCurve | None = None
    moment_gaps: dict[int, MomentGap] = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        return self.constants.sigma


@dataclass
class StageResult:
    """Outcome of one stage at one row size."""

    stage: str
    n: int
    success: bool
    seconds: float
    message: str | None = None


@dataclass
class ReportBundle:
    """Per-size records plus the series-level diagnostics of a finished run."""

    config: ExperimentConfig
    stages: list[str]
    records: list[SizeRecord] = field(default_factory=list)
    results: list[StageResult] = field(default_factory=list)
    fits: list[RateFit] = field(default_factory=list)
    dk_series: RateSeries | None = None
    cumulants: dict[int, CumulantGrowth] = field(default_factory=dict)
    asip: AsipResidual | None = None

    @property
    def passed(self) -> bool:
        return all(r.certification.passed for r in self.records)

    def manifest(self) -> dict:
        cfg = get_config()
        return {
            "varlin_version": __version__,
            "python": platform.python_version(),
            "packages": {"numpy": np.__version__, "scipy": scipy.__version__, "joblib": joblib.__version__},
            "seed": self.config.seed,
            "n_grid": list(self.config.n_grid),
            "tolerance_profile": self.config.tolerance_profile,
            "stages": self.stages,
            "config": self.config.as_dict(),
            "settings": cfg.as_dict(),
        }


class ExperimentRunner:
    """
    Runs the pipeline stages for every row size of an experiment.

    Args:
        config: The experiment.
        progress_callback: Optional callback receiving every StageResult.

    Example:
        >>> from varlin.experiment import ExperimentConfig, ExperimentRunner
        >>> runner = ExperimentRunner(ExperimentConfig(model="iid", n_grid=[256, 512, 1024, 2048]))
        >>> bundle = runner.run()
    """

    def __init__(self, config: ExperimentConfig, progress_callback: Callable[[StageResult], None] | None = None):
        self.config = config
        self.progress_callback = progress_callback
        self.msgs = get_messages(config.lang)

    def run(self, stages: list[str] | None = None) -> ReportBundle:
        """
        Run ``stages`` (all by default) at every size, then the series diagnostics.

        Raises:
            VarlinError: The first hard failure; nothing has been written.
        """
        cfg = self.config
        stages = list(cfg.stages if stages is None else stages)
        apply_tolerance_profile(cfg.tolerance_profile)
        bundle = ReportBundle(config=cfg, stages=stages)
        if cfg.verbose:
            print("=" * 50)
            print(f"{self.msgs['experiment']}: {cfg.model or cfg.model_file}")
            print("=" * 50)
        sizes = cfg.n_grid if cfg.model_file is None else [None]
        for n in sizes:
            model = cfg.build_model(n)
            record = SizeRecord(n=model.n, model=model)
            if cfg.verbose:
                print(f"\n{self.msgs['model']}: {model.model_id}, n={model.n}")
                print("-" * 50)
            for i, stage in enumerate(s for s in stages if s != "report"):
                self._run_stage(bundle, record, i + 1, stage)
            bundle.records.append(record)
        if "diagnose" in stages:
            self._series_diagnostics(bundle)
        if cfg.verbose:
            total = sum(len(r.certification.checks) for r in bundle.records)
            print(f"\n✅ {self.msgs['done']}: {total} {self.msgs['checks']}")
        return bundle

    def _run_stage(self, bundle: ReportBundle, record: SizeRecord, index: int, stage: str) -> None:
        handler = getattr(self, f"_stage_{stage}")
        if self.config.verbose:
            print(f"{index}. {self.msgs[stage]}...", end=" ")
        start = time.perf_counter()
        try:
            note = handler(record)
        except Exception as e:
            result = StageResult(stage, record.n, False, time.perf_counter() - start, str(e))
            bundle.results.append(result)
            if self.config.verbose:
                print(f"❌ {self.msgs['failed']}")
                print(f"   Error: {e}")
            raise
        result = StageResult(stage, record.n, True, time.perf_counter() - start, note)
        bundle.results.append(result)
        if self.config.verbose:
            detail = f" ({note})" if note else ""
            print(f"✅ {self.msgs['passed']}{detail} [{self.msgs['elapsed']} {result.seconds:.2f}s]")
        if self.progress_callback:
            self.progress_callback(result)

    def _stage_validate(self, rec: SizeRecord) -> str:
        rec.profile = profile_for_model(rec.model)
        violations = consistency_check(rec.profile)
        for v in violations:
            rec.certification.add(f"mixing_{v.inequality}[{v.lag}]", v.lhs, v.rhs)
        return f"{rec.model.kind.value}, {len(violations)} mixing violations"

    def _stage_constants(self, rec: SizeRecord) -> str:
        cfg = self.config
        rec.oracle = oracle_for_model(rec.model, cfg.replicates, cfg.seed, cfg.threads)
        rec.constants = constants_for_model(rec.model, rec.profile, rec.oracle, p0=cfg.p0)
        if rec.model.kind == ModelKind.LOCAL_WINDOW:
            growth = window_growth_check(rec.model, rec.constants)
            rec.certification.add("window_growth", growth.ratio, growth.limit)
        c = rec.constants
        return f"Q={c.Q:.4g}, r={c.r}, sigma^2={c.sigma2:.4g}"

    def _stage_blocks(self, rec: SizeRecord) -> str:
        cfg = self.config
        rec.partition = partition_blocks(rec.oracle, rec.constants)
        report = verify_partition(rec.partition, rec.oracle, rec.constants)
        rec.certification.extend(report)
        if getattr(rec.oracle, "exact", False) and not report.passed:
            first = report.failures()[0]
            raise InvariantViolationError(first.check_id, f"lhs={first.lhs!r} rhs={first.rhs!r}")
        rec.beta = estimate_beta(
            rec.model, rec.partition, rec.constants, rec.profile, cfg.p0,
            replicates=cfg.replicates, seed=cfg.seed, n_jobs=cfg.threads,
        )
        rec.constants = replace(rec.constants, beta=rec.beta.empirical)
        return f"k={rec.partition.k}, beta={rec.beta.empirical:.3g}"

    def _stage_decompose(self, rec: SizeRecord) -> str:
        cfg = self.config
        if not rec.model.is_finite:
            logger.info("Skipping decomposition of %s: no finite state space", rec.model.model_id)
            rec.sequential, rec.bounds = self._rate_bounds(rec)
            return self.msgs["skipped"]
        c = rec.constants
        tol = get_config().tolerance.martingale
        rec.decomp = martingale_differences(rec.model, rec.partition, cfg.p0)
        batch = sample_paths(rec.model, cfg.seed, cfg.replicates, n_jobs=cfg.threads)
        telescoping = rec.decomp.telescoping_residual(batch)
        if telescoping > tol:
            raise InvariantViolationError("telescoping", f"residual {telescoping:.3e} exceeds {tol:.1e}")
        rec.certification.add("telescoping", telescoping, 0.0, tol)
        rec.certification.add("variance_transfer", variance_transfer_gap(rec.decomp), 0.0, get_config().tolerance.variance * max(1.0, c.sigma2))
        K_p0 = rec.oracle.marginal_norm(cfg.p0)
        pi = varpi_sum(rec.profile, cfg.p0)
        check = residual_bound_check(rec.decomp, K_p0, c.Q, c.beta, pi)
        rec.certification.add("residual_bound", check.lhs, check.rhs, tol * max(1.0, check.rhs))

        D = rec.decomp.block_differences(batch)
        rec.lyapunov = lyapunov_bound(D, rec.decomp.sigma, c.Q, cfg.p0)
        wants_paths = {"qv", "fdd"} & set(cfg.diagnostics) or cfg.export_paths
        if wants_paths:
            rec.variances = variance_profile(rec.model, rec.oracle)
            rec.paths = build_path_pair(rec.decomp, batch, rec.variances)
            rec.coupled = coupled_pair_bounds(rec.decomp, batch, rec.paths)
        if "qv" in cfg.diagnostics:
            rec.qv = quadratic_variation(
                rec.decomp, batch, rec.variances, constants=c, beta=c.beta, pi_p0=pi, pairs=rec.paths,
            )
            rec.certification.extend(rec.qv.report)
        if "fdd" in cfg.diagnostics:
            rec.fdd = fdd_check(rec.paths)
        if "maximal" in cfg.diagnostics:
            rec.maximal["martingale"] = maximal_inequality_check(D, martingale_b_terms(D, cfg.p0), cfg.p0)
            xi = block_sums(batch, rec.partition)
            rec.maximal["blocks"] = maximal_inequality_check(xi, block_b_terms(rec.decomp, batch, cfg.p0), cfg.p0)
            for name, m in rec.maximal.items():
                rec.certification.add(f"maximal_{name}", m.norm_sum, m.bound_sum, m.guard)
                rec.certification.add(f"maximal_{name}_running", m.norm_max, m.bound_max, m.guard)
        rec.sequential, rec.bounds = self._rate_bounds(rec)
        return f"||R||_2={rec.decomp.residual_2:.4g}"

    def _grouping_length(self, rec: SizeRecord) -> int | None:
        cfg = self.config
        c = rec.constants
        limit = c.sigma2 / (18.0 * c.Q)
        if limit < 1:
            return None
        if cfg.l_rule == "constant":
            raw = cfg.l_value
        elif cfg.l_rule == "sigma":
            raw = cfg.l_value * c.sigma
        else:
            raw = cfg.l_value * (rec.model.memory or 0)
        l_n = max(1, int(math.floor(raw)))
        if l_n > limit:
            logger.warning("Grouping length %d above sigma^2/(18Q)=%.3g at n=%d; clamped", l_n, limit, rec.n)
            l_n = int(math.floor(limit))
        return l_n

    def _rate_bounds(self, rec: SizeRecord) -> tuple[SequentialConstants | None, RateBounds | None]:
        cfg = self.config
        if "bounds" not in cfg.diagnostics:
            return None, None
        K_p0 = rec.oracle.marginal_norm(cfg.p0)
        seq = sequential_constants(
            rec.profile,
            rec.constants,
            K_p0,
            cfg.p0,
            lyapunov=rec.lyapunov.value if rec.lyapunov else None,
            ky_fan=rec.qv.ky_fan if rec.qv else None,
        )
        l_n = self._grouping_length(rec)
        if l_n is None:
            logger.warning("No admissible grouping length at n=%d; rate bounds skipped", rec.n)
            return seq, None
        r_memory = memory_coefficient(rec.model, cfg.p0, l_n // 2, rec.profile, rec.constants, K_p0)
        try:
            return seq, rate_bounds(rec.constants, seq, l_n, cfg.p0, r_memory)
        except PreconditionError as e:
            logger.warning("Rate bounds skipped at n=%d: %s", rec.n, e)
            return seq, None

    def _stage_diagnose(self, rec: SizeRecord) -> str:
        cfg = self.config
        exact = {"dk", "cumulants", "moments", "mdp"} & set(cfg.diagnostics)
        if not exact:
            return ""
        if not rec.model.is_finite:
            logger.info("Exact diagnostics need a finite-state model; %s skipped", rec.model.model_id)
            return self.msgs["skipped"]
        sigma = rec.sigma
        rec.pmf = exact_sum_pmf(rec.model)
        if "dk" in cfg.diagnostics:
            rec.dk = kolmogorov_to_normal(rec.pmf, sigma)
        if "mdp" in cfg.diagnostics:
            a_n = max(1.0, sigma**cfg.mdp_speed_exponent)
            rec.mdp = mdp_curve(rec.pmf, sigma, a_n, cfg.x_grid)
        if "moments" in cfg.diagnostics:
            R_n = berry_esseen_normalizer(rec.constants, cfg.p0)
            rec.moment_gaps = {p: moment_gap(rec.pmf, sigma, p, R_n) for p in cfg.moment_orders}
        return f"d_K={rec.dk.distance:.4g}" if rec.dk else ""

    def _series_diagnostics(self, bundle: ReportBundle) -> None:
        cfg = self.config
        records = [r for r in bundle.records if r.pmf is not None]
        if records and "dk" in cfg.diagnostics:
            bundle.dk_series = RateSeries(
                n=np.array([r.n for r in records]),
                sigma=np.array([r.sigma for r in records]),
                statistic=np.array([r.dk.distance for r in records]),
                statistic_id="d_K",
                model_id=cfg.model or records[0].model.model_id,
            )
            if len(records) >= 4:
                bundle.fits.append(rate_fit(bundle.dk_series))
        if records and "cumulants" in cfg.diagnostics:
            pmfs = [r.pmf for r in records]
            sigmas = [r.sigma for r in records]
            bundle.cumulants = {k: cumulant_growth(pmfs, sigmas, k) for k in cfg.cumulant_orders}
        if "asip" in cfg.diagnostics:
            last = bundle.records[-1]
            bundle.asip = asip_residual(
                last.model, cfg.n_grid, cfg.replicates, cfg.p0, cfg.seed, n_jobs=cfg.threads,
            )


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_bundle(bundle: ReportBundle, out: str | Path) -> list[Path]:
    """
    Write every CSV of a finished bundle plus ``manifest.json``.

    Returns:
        The written paths.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def target(name: str) -> Path:
        path = out / name
        written.append(path)
        return path

    rows = []
    for r in bundle.records:
        if r.constants is None:
            continue
        c = r.constants
        rows.append([r.model.model_id, r.n, c.K, c.r, c.C, c.D, c.Q, c.A, c.sigma, c.beta, c.p0, c.rho_sum,
                     c.qn_floor_ok, c.qn_little_o_ok, r.partition.k if r.partition else None])
    if rows:
        _write_rows(target("constants.csv"),
                    ["model_id", "n", "K", "r", "C", "D", "Q", "A", "sigma", "beta", "p0", "rho_sum",
                     "qn_floor_ok", "qn_little_o_ok", "k_n"],
                    [[_fmt(v) for v in row] for row in rows])

    # An empty diagnostics list keeps the output to constants and the manifest.
    detailed = bool(bundle.config.diagnostics)
    for r in bundle.records if detailed else []:
        if r.profile is not None:
            r.profile.to_csv(target(f"mixing_n{r.n}.csv"))
        if r.partition is not None:
            r.partition.to_csv(target(f"partition_n{r.n}.csv"))
        if r.certification.checks:
            r.certification.to_csv(target(f"certification_n{r.n}.csv"))
        if r.paths is not None and bundle.config.export_paths:
            _export_paths(r.paths, bundle.config.export_paths, target(f"paths_n{r.n}.csv"))

    decomposed = [r for r in bundle.records if r.decomp is not None]
    if decomposed and detailed:
        _write_rows(
            target("decomposition.csv"),
            ["model_id", "n", "statistic_id", "martingale_residual", "residual_p0", "residual_2",
             "expected_qv_terminal", "ky_fan", "ky_fan_bound", "max_deterministic_gap", "qv_gap_bound",
             "lyapunov_sum", "prok_w_cal_w", "prok_cal_w_m"],
            [[_fmt(v) for v in (
                r.model.model_id, r.n, "decomposition",
                r.decomp.martingale_residual, r.decomp.residual_p0, r.decomp.residual_2,
                r.qv.expected_terminal if r.qv else None, r.qv.ky_fan if r.qv else None,
                r.qv.ky_fan_bound if r.qv else None, r.qv.max_deterministic_gap if r.qv else None,
                r.qv.qv_gap_bound if r.qv else None, r.lyapunov.value if r.lyapunov else None,
                r.coupled.w_cal_w if r.coupled else None, r.coupled.cal_w_m if r.coupled else None,
            )] for r in decomposed],
        )
    bounds = [r.bounds for r in bundle.records if r.bounds is not None]
    if bounds:
        write_bounds_csv(bounds, target("bounds.csv"))
    fdd = [r for r in bundle.records if r.fdd is not None]
    if fdd:
        _write_rows(target("fdd.csv"), ["model_id", "n", "statistic_id", "t", "d_K", "dkw_radius", "covariance_error"],
                    [[r.model.model_id, r.n, "fdd", _fmt(t), _fmt(d), _fmt(r.fdd.dkw_radius),
                      _fmt(r.fdd.covariance_error)]
                     for r in fdd for t, d in zip(r.fdd.t, r.fdd.distances)])

    if bundle.dk_series is not None:
        bundle.dk_series.to_csv(target("dk.csv"))
    if bundle.fits:
        write_fits_csv(bundle.fits, target("fits.csv"))
    mdp = [r for r in bundle.records if r.mdp is not None]
    if mdp:
        _write_rows(target("mdp.csv"), ["model_id", "n", "statistic_id", "a_n", "x", "rate", "deviation", "dropped"],
                    [[r.model.model_id, r.n, "mdp_rate", _fmt(r.mdp.a_n), _fmt(p.x), _fmt(p.rate),
                      _fmt(p.deviation), _fmt(p.dropped)]
                     for r in mdp for p in r.mdp.points])
    if bundle.cumulants:
        # cumulant_growth runs over the records that carry an exact law, in order
        exact = [r for r in bundle.records if r.pmf is not None]
        _write_rows(target("cumulants.csv"),
                    ["model_id", "n", "statistic_id", "sigma", "normalized", "negligible", "bounded"],
                    [[r.model.model_id, r.n, f"cumulant_{k}", _fmt(s), _fmt(v), _fmt(neg), _fmt(g.bounded)]
                     for k, g in bundle.cumulants.items()
                     for r, s, v, neg in zip(exact, g.sigma, g.normalized, g.negligible)])
    gaps = [r for r in bundle.records if r.moment_gaps]
    if gaps:
        _write_rows(target("moments.csv"), ["model_id", "n", "statistic_id", "gap", "normalized", "rosenthal_rhs"],
                    [[r.model.model_id, r.n, f"moment_gap_{p}", _fmt(g.gap), _fmt(g.normalized),
                      _fmt(g.rosenthal_rhs)]
                     for r in gaps for p, g in r.moment_gaps.items()])
    if bundle.asip is not None:
        model_id = bundle.records[-1].model.model_id
        _write_rows(target("asip.csv"),
                    ["model_id", "n", "statistic_id", "k_n", "variance", "quantile", "normalized"],
                    [[model_id, row.n, "asip_residual", row.k_n, _fmt(row.variance), _fmt(row.quantile),
                      _fmt(row.normalized)]
                     for row in bundle.asip.rows])

    manifest = bundle.manifest()
    manifest["outputs"] = sorted(p.name for p in written) + ["manifest.json"]
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_fmt)
    written.append(out / "manifest.json")
    logger.info("Wrote %d files to %s", len(written), out)
    return written


def _export_paths(pairs: PathPair, count: int, path: Path) -> None:
    head = min(count, pairs.replicates)
    PathPair(
        t=pairs.t, v=pairs.v, j=pairs.j,
        W=pairs.W[:head], cal_W=pairs.cal_W[:head], M=pairs.M[:head], QV=pairs.QV[:head],
        sigma=pairs.sigma, model_id=pairs.model_id,
    ).to_csv(path)


def emit_plot_data(bundle: ReportBundle, plot_id: str) -> list[tuple[str, float, float, float | None]]:
    """
    Long-format rows ``(series, x, y, y_err)`` for one plot.

    Raises:
        UsageError: Unknown plot id.
    """
    rows: list[tuple[str, float, float, float | None]] = []
    if plot_id == "dk_vs_sigma":
        for r in bundle.records:
            if r.dk is not None:
                rows.append((r.model.model_id, r.sigma, r.dk.distance, None))
    elif plot_id == "mdp_curve":
        for r in bundle.records:
            if r.mdp is not None:
                for p in r.mdp.points:
                    if not p.dropped:
                        rows.append((f"n={r.n}", p.x, p.rate, p.deviation))
                rows.extend((f"n={r.n}:limit", p.x, -p.x * p.x / 2.0, None) for p in r.mdp.points)
    elif plot_id == "block_variances":
        for r in bundle.records:
            if r.partition is None:
                continue
            Q = r.partition.Q
            for j, v in enumerate(r.partition.block_variances, start=1):
                rows.append((f"n={r.n}", j, float(v), None))
                rows.append((f"n={r.n}:band_low", j, Q, None))
                rows.append((f"n={r.n}:band_high", j, 9.0 * Q, None))
    elif plot_id == "cumulants":
        for k, g in bundle.cumulants.items():
            rows.extend((f"k={k}", float(s), float(v), None) for s, v in zip(g.sigma, g.normalized))
    elif plot_id == "moment_gap":
        for r in bundle.records:
            rows.extend((f"p={p}", r.sigma, g.normalized, None) for p, g in r.moment_gaps.items())
    elif plot_id == "quadratic_variation":
        for r in bundle.records:
            if r.qv is not None:
                rows.append(("expected_terminal", r.n, r.qv.expected_terminal, None))
                rows.append(("ky_fan", r.n, r.qv.ky_fan, r.qv.ky_fan_bound))
    elif plot_id == "bounds":
        for r in bundle.records:
            if r.bounds is not None:
                rows.append(("rhs_grouping", r.bounds.sigma, r.bounds.rhs_grouping, None))
                rows.append(("rhs_memory", r.bounds.sigma, r.bounds.rhs_memory, None))
    else:
        raise UsageError(f"Unknown plot id {plot_id!r}; choose from {', '.join(PLOT_IDS)}")
    return rows


def write_plot_csv(rows, path: str | Path) -> None:
    """Write rows ``series, x, y, y_err``."""
    _write_rows(Path(path), ["series", "x", "y", "y_err"], [[s, _fmt(x), _fmt(y), _fmt(e)] for s, x, y, e in rows])


def run_experiment(config: ExperimentConfig, stages: list[str] | None = None, write: bool = True) -> ReportBundle:
    """
    Run an experiment and, when every stage succeeded, write its outputs.

    Raises:
        VarlinError: The first hard failure; nothing is written.
    """
    bundle = ExperimentRunner(config).run(stages)
    if write:
        write_bundle(bundle, config.out)
        if config.verbose:
            msgs = get_messages(config.lang)
            print(f"\n{msgs['outputs_written']}: {config.out}")
    return bundle


__all__ = [
    "STAGES",
    "DIAGNOSTICS",
    "PLOT_IDS",
    "L_RULES",
    "ExperimentConfig",
    "stages_for",
    "SizeRecord",
    "StageResult",
    "ReportBundle",
    "ExperimentRunner",
    "write_bundle",
    "emit_plot_data",
    "write_plot_csv",
    "run_experiment",
]
