"""
Acceptance suites processor - the scripted experiment batches behind
``lcslab suite <name>``.

Each suite validates its parameters with a pydantic model, runs on streams
derived from the root seed and returns tables, reports, figures and named
pass/fail checks.
"""
import hashlib
import logging
import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Type

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import UsageError
from models import OutputFormat
from processors import gaussian_krylov_sampler as gauss
from processors import hard_instances as hard
from processors import kakeya_family as kakeya
from processors import krylov_reduction_sim as reduction
from processors import lowdim_sampler as lowdim
from processors.query_oracle import make_quadratic_oracle
from utils.file_utils import Artifact, iter_files, write_artifact
from utils.parallel import map_trials
from utils.rng import trial_generator

logger = logging.getLogger(__name__)


@dataclass
class SuiteResult:
    name: str
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    reports: Dict[str, Any] = field(default_factory=dict)
    figures: Dict[str, str] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary(self) -> Dict[str, Any]:
        return {"suite": self.name, "passed": self.passed, "checks": self.checks}


class SuiteParams(BaseModel):
    model_config = ConfigDict(extra="forbid")


# 1. Gaussian sampler guarantee

class GaussKlParams(SuiteParams):
    kappas: List[float] = [4, 16, 64, 256]
    dims: List[int] = [16, 256, 4096]
    eps: List[float] = [0.3, 0.1, 0.03]
    spectra: List[str] = list(gauss.SPECTRUM_KINDS)
    c_max: float = 8.0


def gauss_kl_suite(params: GaussKlParams, seed: int) -> SuiteResult:
    result = SuiteResult("gauss-kl")
    rows = []
    for kappa in params.kappas:
        for dim in params.dims:
            for eps in params.eps:
                for kind in params.spectra:
                    row = gauss.kl_table_row(kappa, dim, eps, kind)
                    row["scale"] = math.sqrt(kappa) * math.log(dim / eps)
                    row["kl_ok"] = row["exact_kl"] <= eps ** 2
                    rows.append(row)
    fitted = max(r["queries"] / r["scale"] for r in rows)
    for r in rows:
        r["within_budget"] = r["queries"] <= min(fitted * r["scale"], r["dim"])
    result.tables["gauss_kl"] = rows
    result.reports["fit"] = {"C": fitted, "c_max": params.c_max}
    result.checks["kl_below_eps_squared"] = all(r["kl_ok"] for r in rows)
    result.checks["query_count_within_budget"] = all(r["within_budget"] for r in rows)
    result.checks["fitted_constant"] = fitted <= params.c_max
    return result


# 2. Low-dimensional sampler signature

class LowdimParams(SuiteParams):
    kappas: List[float] = [10, 100, 1000, 10000]
    eps: float = 0.01
    cost_samples: int = 2000
    tv_kappas: List[float] = [1.0, 50.0]
    tv_samples: int = 1_000_000
    tv_chunk: int = 100_000
    tv_bins: int = 20
    tv_max: float = 0.02
    r2_min: float = 0.9


def _quadratic_box(kappa: float):
    return (-5.0, 5.0), (-5.0 / math.sqrt(kappa), 5.0 / math.sqrt(kappa))


def lowdim_suite(params: LowdimParams, seed: int) -> SuiteResult:
    result = SuiteResult("lowdim")
    cost_rows = []
    for index, kappa in enumerate(params.kappas):
        oracle = make_quadratic_oracle(lowdim.quadratic_potential_matrix(kappa), record=False)
        _, stats = lowdim.sample_lowdim(oracle, 2, kappa, params.eps, params.cost_samples,
                                        trial_generator(seed, 0, index))
        cost_rows.append({
            "kappa": kappa,
            "rounding_queries": stats["rounding_queries"],
            "iterations": stats["iterations"],
            "proposals_per_sample": stats["proposals_per_sample"],
            "total_per_sample": stats["rounding_queries"] + stats["proposals_per_sample"],
            "acceptance_in_inner": stats["acceptance_in_inner"],
        })
    rounding_fit = lowdim.fit_log_signature(params.kappas, [r["rounding_queries"] for r in cost_rows])
    total_fit = lowdim.fit_log_signature(params.kappas, [r["total_per_sample"] for r in cost_rows])
    result.tables["lowdim_cost"] = cost_rows
    result.reports["fits"] = {"rounding": rounding_fit, "total": total_fit}
    result.checks["rounding_log_kappa_fit"] = rounding_fit["r2"] >= params.r2_min and rounding_fit["b"] > 0
    result.checks["total_log_kappa_fit"] = total_fit["r2"] >= params.r2_min
    result.checks["acceptance_in_inner"] = all(r["acceptance_in_inner"] >= math.exp(-1) for r in cost_rows)

    tv_rows = []
    for index, kappa in enumerate(params.tv_kappas):
        matrix = lowdim.quadratic_potential_matrix(kappa)
        rounding = lowdim.ellipsoid_round(
            lowdim.SublevelOracle(make_quadratic_oracle(matrix, record=False)), 2, max(kappa, 1.0)
        )
        chunks = math.ceil(params.tv_samples / params.tv_chunk)

        def draw(i: int, rng: np.random.Generator) -> np.ndarray:
            count = min(params.tv_chunk, params.tv_samples - i * params.tv_chunk)
            oracle = make_quadratic_oracle(matrix, record=False)
            return lowdim.rejection_sample_many(oracle, rounding.outer, 2, params.eps, count, rng).samples

        samples = np.vstack(map_trials(draw, chunks, seed, path=(1, index)))
        tv = lowdim.binned_tv_against_quadrature(
            samples,
            lambda pts: 0.5 * np.einsum("ij,jk,ik->i", pts, matrix, pts),
            _quadratic_box(kappa),
            bins=params.tv_bins,
        )
        tv_rows.append({"kappa": kappa, "samples": len(samples), "bins": params.tv_bins, "tv": tv})
    result.tables["lowdim_tv"] = tv_rows
    result.checks["binned_tv"] = all(r["tv"] <= params.tv_max for r in tv_rows)
    return result


# 3. Kakeya structure

class KakeyaParams(SuiteParams):
    N_values: List[int] = [6, 8, 10]
    strings_per_N: int = 4
    points: int = 10_000
    coincidence_N: List[int] = [1, 2, 3, 4]
    coincidence_points: int = 10_000
    render_N: int = 4
    render_bits: List[str] = ["0000", "1010", "1111"]
    omega_N: int = 2
    omega_min: float = 0.05


def kakeya_suite(params: KakeyaParams, seed: int) -> SuiteResult:
    result = SuiteResult("kakeya")
    rows = []
    for n_index, N in enumerate(params.N_values):
        pick = trial_generator(seed, 0, n_index)
        for s in range(params.strings_per_N):
            b = kakeya.BitString.from_int(int(pick.integers(0, 2 ** N)), N)
            counts = kakeya.check_structure(b, trial_generator(seed, 1, n_index, s), params.points)
            rows.append({"N": N, "b": str(b), "points": params.points, **counts})
    result.tables["kakeya_structure"] = rows
    for key in ("convexity", "flat_near_zero_set", "growth", "induction"):
        result.checks[f"no_{key}_violations"] = all(r[key] == 0 for r in rows)

    coincidence = []
    for index, N in enumerate(params.coincidence_N):
        counts = kakeya.check_coincidence(N, trial_generator(seed, 2, index), params.coincidence_points)
        coincidence.append({"N": N, **counts})
    result.tables["kakeya_coincidence"] = coincidence
    result.checks["exact_coincidence"] = all(r["mismatches"] == 0 for r in coincidence)

    result.figures["kakeya_zero_sets"] = kakeya.render_zero_sets(
        params.render_N, params.render_bits, radii=[0.25, 0.5]
    )

    profile = kakeya.KakeyaProfile.reduced()
    masses = [
        {"b": str(b), "profile": profile.name, "mass": kakeya.omega_mass(b, profile)}
        for b in kakeya.all_bitstrings(params.omega_N)
    ]
    result.tables["omega_mass"] = masses
    result.checks["omega_mass_bounded_below"] = min(m["mass"] for m in masses) >= params.omega_min
    return result


# 4. Leakage signature

class LeakageParams(SuiteParams):
    N_values: List[int] = [8, 12, 16, 20]
    random_queries: int = 50
    random_trials: int = 2000
    bisection_trials: int = 10_000
    max_bits: float = 6.0
    slope_tol: float = 0.05
    identify_fraction: float = 0.99


def leakage_suite(params: LeakageParams, seed: int) -> SuiteResult:
    result = SuiteResult("leakage")
    rows = []
    for index, N in enumerate(params.N_values):
        random_report = kakeya.leakage_experiment(
            N, params.random_queries, "random", params.random_trials, trial_generator(seed, 0, index)
        )
        bisection = kakeya.leakage_experiment(
            N, N + 2, "bisection", params.bisection_trials, trial_generator(seed, 1, index)
        )
        rows.append({
            "N": N,
            "random_avg_bits": random_report.avg_bits_per_query,
            "random_cap_events": random_report.cap_events,
            "random_floor_events": random_report.floor_events,
            "bisection_identified": bisection.identified_fraction,
            "bisection_queries_mean": bisection.queries_to_identify_mean,
        })
        result.reports[f"random_N{N}"] = random_report.model_dump(mode="json")
    slope = float(np.polyfit(params.N_values, [r["random_avg_bits"] for r in rows], 1)[0]) if len(rows) > 1 else 0.0
    result.tables["leakage"] = rows
    result.reports["random_slope"] = slope
    result.checks["bits_per_query_bounded"] = all(r["random_avg_bits"] <= params.max_bits for r in rows)
    result.checks["no_growth_in_N"] = abs(slope) <= params.slope_tol
    result.checks["bisection_identifies"] = all(r["bisection_identified"] >= params.identify_fraction for r in rows)
    return result


# 5. Wishart facts

class WishartParams(SuiteParams):
    tail_dims: List[int] = [8, 32]
    x_grid: List[float] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
    tail_trials: int = 100_000
    ratio_bounds: List[float] = [0.2, 5.0]
    variance_dim: int = 6
    variance_draws: int = 200_000
    z_max: float = 5.0
    invtrace_dim: int = 64
    invtrace_trials: int = 10_000
    invtrace_strategy: str = "hutchinson"
    invtrace_n_grid: List[int] = [4, 16, 64]
    bounded_fraction_min: float = 0.45
    posterior_n: int = 2
    posterior_d: int = 8
    posterior_trials: int = 1000


def _test_covariances(dim: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    G = rng.standard_normal((dim, dim))
    return {
        "identity": np.eye(dim),
        "graded": np.diag(np.arange(1.0, dim + 1.0)),
        "random": G @ G.T / dim + 0.1 * np.eye(dim),
    }


def wishart_suite(params: WishartParams, seed: int) -> SuiteResult:
    result = SuiteResult("wishart")
    tail_rows = []
    low, high = params.ratio_bounds
    for d in params.tail_dims:
        rows = hard.smallest_eig_tail(d, params.x_grid, params.tail_trials, seed)
        tail_rows.extend(rows)
        result.checks[f"tail_monotone_d{d}"] = hard.tail_is_monotone(rows)
    result.tables["wishart_tail"] = tail_rows
    result.checks["tail_ratio_bounded"] = all(low <= r["ratio"] <= high for r in tail_rows)

    variance_rows = []
    for index, (name, sigma) in enumerate(_test_covariances(params.variance_dim, trial_generator(seed, 10)).items()):
        stats = hard.squared_norm_variance(sigma, params.variance_draws, trial_generator(seed, 11, index))
        variance_rows.append({"sigma": name, **stats})
    result.tables["squared_norm_variance"] = variance_rows
    result.checks["variance_within_z_max"] = all(abs(r["z_score"]) <= params.z_max for r in variance_rows)

    invtrace = hard.inverse_trace_query_experiment(
        params.invtrace_dim, params.invtrace_strategy, params.invtrace_n_grid, params.invtrace_trials, seed
    )
    result.tables["inverse_trace"] = invtrace
    result.checks["inverse_trace_bounded"] = invtrace[0]["trace_bounded_fraction"] >= params.bounded_fraction_min

    result.reports["posterior_minorization"] = hard.posterior_minorization_check(
        params.posterior_n, params.posterior_d, params.posterior_trials, trial_generator(seed, 12)
    )
    result.checks["posterior_minorization"] = result.reports["posterior_minorization"]["violations"] == 0
    return result


# 6. LP duality

class LpParams(SuiteParams):
    K_max: int = 12
    kappas: List[float] = [9, 64, 256]
    d: int = 4096
    brute_force_K: int = 2
    brute_force_tol: float = 1e-8


def lp_suite(params: LpParams, seed: int) -> SuiteResult:
    result = SuiteResult("lp-duality")
    c1 = hard.default_c1(max(params.kappas), params.d)
    rows = []
    for kappa in params.kappas:
        for K in range(1, params.K_max + 1):
            pair = hard.solve_moment_lp(K, kappa, params.d, c1)
            dual = 2 * params.d * pair.minimax_error
            min_x = float(min(pair.x.min(), pair.x_prime.min()))
            ratio = float(np.max(np.abs(pair.x - pair.x_prime) / pair.x))
            row = {
                "K": K,
                "kappa": kappa,
                "d": params.d,
                "primal": pair.lp_value,
                "dual": dual,
                "relative_gap": abs(pair.lp_value - dual) / dual,
                "min_x": min_x,
                "min_x_bound": params.d / (2 * (K + 2)),
                "ratio": ratio,
                "ratio_bound": 2 * c1 / (1 - c1),
                "brute_force": "",
            }
            if K <= params.brute_force_K:
                row["brute_force"] = hard.brute_force_lp(K, kappa, params.d)
            rows.append(row)
    result.tables["lp_duality"] = rows
    result.reports["c1"] = c1
    result.checks["duality_gap"] = all(r["relative_gap"] <= 1e-6 for r in rows)
    result.checks["min_multiplicity"] = all(r["min_x"] >= r["min_x_bound"] * (1 - 1e-12) for r in rows)
    result.checks["ratio_bound"] = all(r["ratio"] <= r["ratio_bound"] * (1 + 1e-9) for r in rows)
    result.checks["brute_force_match"] = all(
        abs(r["brute_force"] - r["primal"]) <= params.brute_force_tol * max(abs(r["primal"]), 1.0)
        for r in rows if r["brute_force"] != ""
    )
    return result


# 7. Block-Krylov dichotomy

class DichotomyParams(SuiteParams):
    d: int = 4096
    kappa: float = 16.0
    transcripts: int = 500
    coupling_trials: int = 1000
    coupling_min: float = 0.9
    distinguish_trials: int = 1000
    distinguish_c1: float = 0.5
    accuracy_min: float = 0.95
    alpha: float = 0.05
    permutations: Optional[int] = None
    goe_K: int = 2
    goe_N: List[int] = [50, 200, 800]
    goe_samples: int = 2000


def dichotomy_suite(params: DichotomyParams, seed: int) -> SuiteResult:
    result = SuiteResult("dichotomy")
    K = hard.lp_threshold(params.kappa, params.d)
    c1 = hard.default_c1(params.kappa, params.d)
    pair = hard.build_hard_pair(K, params.kappa, params.d, c1, trial_generator(seed, 0), seed=seed)
    result.reports["hard_pair"] = pair.to_record().model_dump(mode="json")

    coupling = hard.goe_coupling_experiment(
        K,
        [(int(n), int(m)) for n, m in zip(pair.N, pair.N_prime)],
        (pair.x - pair.x_prime).tolist(),
        params.coupling_trials,
        trial_generator(seed, 1),
    )
    result.reports["coupling"] = coupling
    result.checks["coupling_success"] = coupling["success_rate"] >= params.coupling_min

    width = max(1, K // 2)
    test = hard.transcript_dichotomy_test(pair, width, K, params.transcripts, seed, params.permutations)
    result.reports["transcript_test"] = {"width": width, "depth": K, **test.model_dump(mode="json")}
    result.checks["transcripts_indistinguishable"] = test.p_value >= params.alpha

    strong = hard.build_hard_pair(K, params.kappa, params.d, params.distinguish_c1, trial_generator(seed, 2), seed=seed)
    accuracy = hard.distinguisher_accuracy(strong, params.distinguish_trials, seed)
    result.reports["distinguisher"] = {"c1": params.distinguish_c1, **accuracy}
    result.checks["single_sample_distinguishes"] = accuracy["accuracy"] >= params.accuracy_min
    # same instance as the distinguisher; informational only
    strong_test = hard.transcript_dichotomy_test(strong, width, K, params.transcripts, seed, params.permutations)
    result.reports["strong_transcript_test"] = {
        "c1": params.distinguish_c1,
        "width": width,
        "depth": K,
        "indistinguishable": strong_test.p_value >= params.alpha,
        **strong_test.model_dump(mode="json"),
    }

    goe_rows = [
        hard.goe_classifier_advantage(params.goe_K, N, params.goe_samples, trial_generator(seed, 3, index))
        for index, N in enumerate(params.goe_N)
    ]
    result.tables["goe_classifier"] = goe_rows
    return result


# 8. Reduction correctness

class ReductionParams(SuiteParams):
    dim: int = 48
    K: int = 4
    trials: int = 2000
    algorithms: List[str] = ["fresh", "power", "hybrid"]
    kappa: float = 4.0
    residual_tol: float = 1e-10
    alpha: float = 0.05
    permutations: Optional[int] = None
    hardpair_dim: int = 256
    hardpair_K: int = 3
    hardpair_kappa: float = 16.0
    hardpair_trials: int = 2000
    conditioning_d: int = 8
    conditioning_m: List[int] = [1, 3, 4]
    conditioning_trials: int = 1000


def reduction_suite(params: ReductionParams, seed: int) -> SuiteResult:
    result = SuiteResult("reduction")
    rows = []
    for index, name in enumerate(params.algorithms):
        report = reduction.reduction_experiment(
            name, params.dim, params.K, params.trials, seed + index, params.kappa,
            params.permutations, negative_control=(name == "power"),
        )
        rows.append(_reduction_row(report, "reference"))
        result.reports[f"reduction_{name}"] = report.model_dump(mode="json")
        result.checks[f"{name}_identities"] = _residuals_ok(report, params.residual_tol)
        result.checks[f"{name}_accepts"] = report.two_sample.p_value >= params.alpha
        if report.negative_control is not None:
            result.checks[f"{name}_negative_control_rejects"] = report.negative_control.p_value < params.alpha

    if params.hardpair_trials > 0:
        lp_K = hard.lp_threshold(params.hardpair_kappa, params.hardpair_dim)
        c1 = hard.default_c1(params.hardpair_kappa, params.hardpair_dim)
        pair = hard.build_hard_pair(lp_K, params.hardpair_kappa, params.hardpair_dim, c1, trial_generator(seed, 7), rotate=False)
        report = reduction.reduction_experiment(
            "power", params.hardpair_dim, params.hardpair_K, params.hardpair_trials, seed + 100,
            permutations=params.permutations, negative_control=False, spectrum=pair.diagonal,
        )
        rows.append(_reduction_row(report, "hard-pair"))
        result.checks["hard_pair_identities"] = _residuals_ok(report, params.residual_tol)
        result.checks["hard_pair_accepts"] = report.two_sample.p_value >= params.alpha
    result.tables["reduction"] = rows

    conditioning = []
    for m in params.conditioning_m:
        for control in (False, True):
            if control and m < 3:
                continue
            test = reduction.conditioning_lemma_check(
                params.conditioning_d, m, params.conditioning_trials, seed + 200,
                negative_control=control, permutations=params.permutations,
            )
            conditioning.append({"m": m, "negative_control": control, "statistic": test.statistic,
                                 "p_value": test.p_value})
            key = f"conditioning_m{m}_{'control_rejects' if control else 'accepts'}"
            result.checks[key] = (test.p_value < params.alpha) if control else (test.p_value >= params.alpha)
    result.tables["conditioning"] = conditioning
    return result


def _reduction_row(report, ensemble: str) -> Dict[str, Any]:
    res = report.identity_residuals
    row = {
        "algorithm": report.algorithm, "ensemble": ensemble, "dim": report.dim, "K": report.K,
        "trials": report.trials, "P2_max": res.P2_max, "P3_max": res.P3_max, "P4_max": res.P4_max,
        "orthogonality_max": res.orthogonality_max, "audit_passed": res.audit_passed,
        "statistic": report.two_sample.statistic, "p_value": report.two_sample.p_value,
        "control_p_value": report.negative_control.p_value if report.negative_control else "",
    }
    return row


def _residuals_ok(report, tol: float) -> bool:
    res = report.identity_residuals
    return res.audit_passed and max(res.P2_max, res.P3_max, res.P4_max, res.orthogonality_max) <= tol


# 9. Determinism

class DeterminismParams(SuiteParams):
    target: str = "lp-duality"
    target_params: Dict[str, Any] = Field(default_factory=dict)


def determinism_suite(params: DeterminismParams, seed: int) -> SuiteResult:
    """Run the target suite twice with the same seed and compare artifact bytes."""
    if params.target == "determinism":
        raise UsageError("determinism cannot target itself")
    result = SuiteResult("determinism")
    digests: List[Dict[str, str]] = []
    meta = {"seed": seed, "suite": params.target}
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        for directory in (first, second):
            outcome = execute_suite(params.target, params.target_params, seed)
            for artifact in suite_artifacts(outcome):
                write_artifact(artifact, Path(directory) / artifact.filename, meta)
        left = {p.name: p for p in iter_files(Path(first))}
        right = {p.name: p for p in iter_files(Path(second))}
        for name in sorted(set(left) | set(right)):
            a = hashlib.sha256(left[name].read_bytes()).hexdigest() if name in left else ""
            b = hashlib.sha256(right[name].read_bytes()).hexdigest() if name in right else ""
            digests.append({"file": name, "first": a, "second": b, "identical": a == b and a != ""})
    result.tables["determinism"] = digests
    result.checks["identical_outputs"] = bool(digests) and all(d["identical"] for d in digests)
    return result


# Registry

SUITES: Dict[str, Tuple[Type[SuiteParams], Callable[[Any, int], SuiteResult]]] = {
    "gauss-kl": (GaussKlParams, gauss_kl_suite),
    "lowdim": (LowdimParams, lowdim_suite),
    "kakeya": (KakeyaParams, kakeya_suite),
    "leakage": (LeakageParams, leakage_suite),
    "wishart": (WishartParams, wishart_suite),
    "lp-duality": (LpParams, lp_suite),
    "dichotomy": (DichotomyParams, dichotomy_suite),
    "reduction": (ReductionParams, reduction_suite),
    "determinism": (DeterminismParams, determinism_suite),
}


def resolve_params(name: str, params: Optional[Dict[str, Any]] = None) -> SuiteParams:
    """
    Validate suite parameters against the suite's schema.

    Raises:
        UsageError: If the suite is unknown or the parameters do not validate
    """
    if name not in SUITES:
        raise UsageError(f"Unknown suite '{name}'; expected one of {sorted(SUITES)}")
    model: Type[SuiteParams] = SUITES[name][0]
    try:
        return model(**(params or {}))
    except ValidationError as e:
        raise UsageError(f"Invalid parameters for suite '{name}': {e.errors(include_url=False)}")


def execute_suite(name: str, params: Optional[Dict[str, Any]], seed: int) -> SuiteResult:
    resolved = resolve_params(name, params)
    logger.info(f"Running suite {name} with seed {seed}")
    outcome = SUITES[name][1](resolved, seed)
    failed = [k for k, ok in outcome.checks.items() if not ok]
    if failed:
        logger.warning(f"Suite {name}: failed checks {failed}")
    else:
        logger.info(f"Suite {name}: all {len(outcome.checks)} checks passed")
    return outcome


def suite_artifacts(outcome: SuiteResult) -> List[Artifact]:
    """report.json first, then one CSV per table and one SVG per figure."""
    artifacts = [Artifact("report", OutputFormat.JSON, {"reports": outcome.reports, **outcome.summary()})]
    artifacts += [Artifact(table, OutputFormat.CSV, rows) for table, rows in outcome.tables.items()]
    artifacts += [Artifact(figure, OutputFormat.SVG, svg) for figure, svg in outcome.figures.items()]
    return artifacts
