"""
Verification Service
Runs the enumeration and Monte Carlo suites that check the closed forms
against exact enumeration and simulation
"""
import logging
from typing import List, Tuple

import numpy as np
from scipy import stats

from core.config import settings
from core.random_streams import StreamTag, derive_seed, stream
from schemas.result import CheckResult, VerificationReport, VerifyConfig
from schemas.resampling import StatisticSpec
from schemas.simulation import GenerativeSpec, IncidenceSpec
from schemas.variance import CellMap, VarianceComponents
from services.dataset import TripletDataset, incidence_summary
from services.enumeration import PigeonholeEnumerator
from services.resampling import contrast, run_bootstrap
from services.simulator import (
    draw_responses,
    effective_components,
    gen_incidence,
    mar_variance_check,
    monte_carlo_expectation,
)
from services.statistics import variance_with_se
from services.variance import (
    bounds_from_components,
    consistency_diagnostics,
    e_re_naive_variance,
    e_re_pigeonhole_variance,
    naive_plugin_variance,
    pigeonhole_plugin_variance,
    v_pb_total,
    v_re,
)

logger = logging.getLogger(__name__)

SUITES = ("enumeration", "montecarlo", "all")
CONTRAST_LABELS = ("Sun", "Tue")


def d1_dataset() -> TripletDataset:
    """The 2 x 2 reference grid with values 1, 2, 3, 4"""
    return TripletDataset.from_arrays(np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]),
                                      np.array([1.0, 2.0, 3.0, 4.0]),
                                      row_keys=["r1", "r2"], col_keys=["c1", "c2"])


# Check constructors

def exact_check(name: str, measured: float, oracle: float, rel_tol: float) -> CheckResult:
    """Deterministic agreement to rel_tol, relative to max(|oracle|, 1)"""
    tolerance = rel_tol * max(abs(oracle), 1.0)
    status = "pass" if abs(measured - oracle) <= tolerance else "fail"
    return CheckResult(name=name, status=status, measured=measured, oracle=oracle, tolerance=tolerance)


def monte_carlo_check(name: str, measured: float, oracle: float, se: float, multiplier: float) -> CheckResult:
    """
    Agreement within multiplier standard errors

    Inconclusive when the standard error is too large to resolve the oracle.
    """
    tolerance = multiplier * se
    if se > settings.VERIFY_INCONCLUSIVE_REL_SE * abs(oracle):
        status = "inconclusive"
    elif abs(measured - oracle) <= tolerance:
        status = "pass"
    else:
        status = "fail"
    return CheckResult(name=name, status=status, measured=measured, oracle=oracle, tolerance=tolerance,
                       detail=f"se={se:.6g}")


def bound_check(name: str, measured: float, limit: float, upper: bool = True) -> CheckResult:
    ok = measured <= limit if upper else measured >= limit
    return CheckResult(name=name, status="pass" if ok else "fail", measured=measured, oracle=limit,
                       tolerance=0.0, detail="upper bound" if upper else "lower bound")


class Verifier:
    """Builds the grid and pattern families from one seed and runs the suites"""

    def __init__(self, config: VerifyConfig, seed: int):
        self.config = config
        self.seed = seed

    def run(self, suite: str) -> VerificationReport:
        if suite not in SUITES:
            raise ValueError(f"unknown suite '{suite}'")
        report = VerificationReport(suite=suite, seed=self.seed)
        if suite in ("enumeration", "all"):
            report.checks.extend(self.enumeration_suite())
        if suite in ("montecarlo", "all"):
            report.checks.extend(self.montecarlo_suite())
        logger.info(f"Verification {suite}: {report.counts()}")
        return report

    # Enumeration

    def enumeration_grids(self) -> List[Tuple[str, TripletDataset]]:
        """Fixed edge-case grids plus random sparse grids with R, C <= 4"""
        value_rng = stream(self.seed, 0, StreamTag.RESPONSES)
        grids = [
            ("d1", d1_dataset()),
            ("single_cell", TripletDataset.from_arrays([0], [0], [3.5])),
            ("single_column", TripletDataset.from_arrays([0, 1, 2], [0, 0, 0], value_rng.normal(size=3))),
            ("single_row", TripletDataset.from_arrays([0, 0, 0], [0, 1, 2], value_rng.normal(size=3))),
            ("full_3x4", TripletDataset.from_arrays(np.repeat(np.arange(3), 4), np.tile(np.arange(4), 3),
                                                    value_rng.normal(size=12))),
        ]
        for k in range(self.config.N_ENUMERATION_GRIDS):
            rng = stream(self.seed, k, StreamTag.PATTERN)
            R, C = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            cells = np.flatnonzero(rng.random(R * C) < 0.6)
            if cells.size == 0:
                cells = np.array([int(rng.integers(0, R * C))])
            grids.append((f"random_{k}_{R}x{C}",
                          TripletDataset.from_arrays(cells // C, cells % C, rng.normal(size=cells.size))))
        return grids

    def enumeration_suite(self) -> List[CheckResult]:
        tol = settings.VERIFY_REL_TOL
        checks = []
        for name, ds in self.enumeration_grids():
            enum = PigeonholeEnumerator(ds)
            checks.extend([
                exact_check(f"enumeration/{name}/mean_total", enum.mean_total(), float(np.sum(ds.values)), tol),
                exact_check(f"enumeration/{name}/mean_count", enum.mean_count(), float(ds.N), tol),
                exact_check(f"enumeration/{name}/var_total", enum.var_total(), v_pb_total(ds), tol),
                exact_check(f"enumeration/{name}/delta_ratio_variance", enum.delta_ratio_variance(),
                            pigeonhole_plugin_variance(ds), tol),
            ])
        return checks

    # Monte Carlo

    def _expectation_checks(self, name: str, ds: TripletDataset, gspec: GenerativeSpec, M: int,
                            index: int) -> List[CheckResult]:
        summary = incidence_summary(ds)
        comp = effective_components(ds, gspec)
        oracles = {
            "pigeonhole_plugin_variance": e_re_pigeonhole_variance(summary, comp, "exact"),
            "naive_plugin_variance": e_re_naive_variance(summary, comp),
            "grand_mean_variance": v_re(summary, comp),
        }
        k = self.config.SE_MULTIPLIER
        checks = []
        for t, (target, oracle) in enumerate(oracles.items()):
            res = monte_carlo_expectation(ds, gspec, target, M, derive_seed(self.seed, 1000 * index + t))
            checks.append(monte_carlo_check(f"montecarlo/{name}/{target}", res.estimate, oracle,
                                            res.standard_error, k))
        return checks

    def _random_pattern(self, k: int) -> Tuple[TripletDataset, VarianceComponents]:
        rng = stream(self.seed, 100 + k, StreamTag.PATTERN)
        R, C = int(rng.integers(3, 7)), int(rng.integers(3, 7))
        ds = gen_incidence(IncidenceSpec(kind="bernoulli", R=R, C=C, p=0.6, seed=derive_seed(self.seed, 100 + k))).dataset
        comp = VarianceComponents(
            sigma2_a=rng.uniform(0.5, 2.0, size=ds.R),
            sigma2_b=rng.uniform(0.5, 2.0, size=ds.C),
            sigma2_e=CellMap.from_records(ds.row_idx, ds.col_idx, rng.uniform(0.25, 1.5, size=ds.N)),
            mu=float(rng.normal()),
        )
        return ds, comp

    def montecarlo_suite(self) -> List[CheckResult]:
        cfg = self.config
        unit = VarianceComponents.homogeneous(1.0, 1.0, 1.0)
        checks = self._expectation_checks("d1", d1_dataset(), GenerativeSpec(comp=unit), cfg.M, 0)

        for k in range(cfg.N_RANDOM_PATTERNS):
            ds, comp = self._random_pattern(k)
            checks.extend(self._expectation_checks(f"random_{k}", ds, GenerativeSpec(comp=comp), cfg.M, 1 + k))

        grid = gen_incidence(IncidenceSpec(kind="bernoulli", R=5, C=6, p=0.7, seed=self.seed)).dataset
        outer = GenerativeSpec(model="outer_product", comp=unit, singular_values=[1.0, 0.5],
                               tau2_u=[1.0, 0.5], tau2_v=[1.0, 2.0])
        tukey = GenerativeSpec(model="tukey", comp=unit, tukey_lambda=0.7)
        checks.extend(self._expectation_checks("outer_product", grid, outer, cfg.M, 900))
        checks.extend(self._expectation_checks("tukey", grid, tukey, cfg.M, 901))

        mar = mar_variance_check(grid, GenerativeSpec(comp=unit), 0.7, cfg.M_REGIME, derive_seed(self.seed, 902))
        checks.append(monte_carlo_check("montecarlo/mar/grand_mean_variance", mar.empirical_variance,
                                        mar.mean_v_re, float(np.hypot(mar.standard_error, mar.v_re_standard_error)),
                                        cfg.SE_MULTIPLIER))
        checks.extend(self.zipf_regime_checks())
        checks.extend(self.contrast_checks())
        return checks

    def zipf_regime_checks(self) -> List[CheckResult]:
        """Closed-form regime checks and bootstrap reproduction on a Zipf pattern"""
        cfg = self.config
        spec = IncidenceSpec(kind="zipf_margins", R=cfg.ZIPF_R, C=cfg.ZIPF_C, alpha_row=cfg.ZIPF_ALPHA_ROW,
                             alpha_col=cfg.ZIPF_ALPHA_COL, target_n=cfg.ZIPF_TARGET_N, seed=self.seed)
        skeleton = gen_incidence(spec)
        ds = skeleton.dataset
        summary = incidence_summary(ds)
        unit = VarianceComponents.homogeneous(1.0, 1.0, 1.0)
        eps = summary.epsilon_n
        truth = v_re(summary, unit)
        exact = e_re_pigeonhole_variance(summary, unit, "exact")
        approx = e_re_pigeonhole_variance(summary, unit, "approx")
        diagnostics = consistency_diagnostics(summary, unit, bounds_from_components(summary, unit))
        detail = f"attempts={skeleton.generation_attempts}"
        checks = [
            bound_check("zipf/epsilon_n", eps, settings.ZIPF_MAX_EPSILON),
            bound_check("zipf/approx_relative_error", abs(approx - exact) / exact, 5.0 * eps),
            bound_check("zipf/naive_ratio", e_re_naive_variance(summary, unit) / truth, 0.05),
            bound_check("zipf/pigeonhole_ratio_low", exact / truth, 1.0, upper=False),
            bound_check("zipf/pigeonhole_ratio_high", exact / truth, 1.5),
            bound_check("zipf/rho_n", diagnostics.rho_n, diagnostics.rho_bound),
        ]
        for check in checks:
            check.detail = detail

        data = draw_responses(ds, GenerativeSpec(comp=unit), stream(self.seed, 0, StreamTag.RESPONSES))
        for scheme, plugin in (("naive", naive_plugin_variance(data)), ("pigeonhole", pigeonhole_plugin_variance(data))):
            run = run_bootstrap(data, scheme, StatisticSpec.grand_mean(), cfg.B_REGIME, derive_seed(self.seed, 903))
            variance, se = variance_with_se(run.values_array())
            checks.append(monte_carlo_check(f"zipf/bootstrap_{scheme}_variance", variance, plugin, se,
                                            cfg.SE_MULTIPLIER))
        return checks

    # Label contrasts

    def contrast_pattern(self) -> TripletDataset:
        """The Zipf regime pattern with one label per row, drawn from CONTRAST_LABELS"""
        cfg = self.config
        spec = IncidenceSpec(kind="zipf_margins", R=cfg.ZIPF_R, C=cfg.ZIPF_C, alpha_row=cfg.ZIPF_ALPHA_ROW,
                             alpha_col=cfg.ZIPF_ALPHA_COL, target_n=cfg.ZIPF_TARGET_N, seed=self.seed,
                             labels=list(CONTRAST_LABELS), label_unit="row")
        return gen_incidence(spec).dataset

    def _contrast_spec(self, delta: float) -> GenerativeSpec:
        cfg = self.config
        comp = VarianceComponents.homogeneous(cfg.CONTRAST_SIGMA2_A, cfg.CONTRAST_SIGMA2_B, cfg.CONTRAST_SIGMA2_E)
        return GenerativeSpec(comp=comp, label_effects={CONTRAST_LABELS[0]: delta} if delta else {})

    def null_contrast_p_values(self, ds: TripletDataset) -> np.ndarray:
        """Two-sided p-values of N_CONTRAST_REPS contrasts on fresh responses without a label effect"""
        cfg = self.config
        null = self._contrast_spec(0.0)
        p_values = np.empty(cfg.N_CONTRAST_REPS)
        for r in range(cfg.N_CONTRAST_REPS):
            data = draw_responses(ds, null, stream(derive_seed(self.seed, 906), r, StreamTag.RESPONSES))
            p_values[r] = contrast(data, *CONTRAST_LABELS, cfg.B_CONTRAST, derive_seed(self.seed, 10_000 + r)).p_value
        return p_values

    def contrast_checks(self) -> List[CheckResult]:
        """
        End-to-end contrast on the Zipf pattern

        An injected effect of CONTRAST_DELTA must be recovered within
        SE_MULTIPLIER bootstrap standard errors with p below CONTRAST_P_MAX.
        Without an effect the p-values must pass a Kolmogorov-Smirnov test of
        uniformity at level CONTRAST_KS_ALPHA.
        """
        cfg = self.config
        ds = self.contrast_pattern()
        data = draw_responses(ds, self._contrast_spec(cfg.CONTRAST_DELTA),
                              stream(derive_seed(self.seed, 904), 0, StreamTag.RESPONSES))
        result = contrast(data, *CONTRAST_LABELS, cfg.B_CONTRAST, derive_seed(self.seed, 905))
        checks = [
            monte_carlo_check("contrast/effect_mean_diff", result.mean_diff, cfg.CONTRAST_DELTA, result.sd_diff,
                              cfg.SE_MULTIPLIER),
            bound_check("contrast/effect_p_value", result.p_value, cfg.CONTRAST_P_MAX),
        ]
        for check in checks:
            check.detail = f"N={ds.N}, B={cfg.B_CONTRAST}, dropped={result.dropped}, sd_diff={result.sd_diff:.6g}"

        if cfg.N_CONTRAST_REPS:
            p_values = self.null_contrast_p_values(ds)
            ks = stats.kstest(p_values, "uniform")
            critical = float(stats.kstwo.ppf(1.0 - cfg.CONTRAST_KS_ALPHA, p_values.size))
            check = bound_check("contrast/null_p_uniformity_ks", float(ks.statistic), critical)
            check.detail = f"repetitions={p_values.size}, ks_pvalue={ks.pvalue:.4g}"
            checks.append(check)
        return checks
