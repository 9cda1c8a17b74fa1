import pytest

from errors import UsageError
from models import OutputFormat
from processors import suites
from processors.suites import execute_suite, resolve_params, suite_artifacts

SMALL_LP = {"K_max": 2, "kappas": [9], "d": 64}


def test_resolve_defaults_and_unknowns():
    assert resolve_params("lp-duality").K_max == 12
    with pytest.raises(UsageError):
        resolve_params("nope")
    with pytest.raises(UsageError):
        resolve_params("lp-duality", {"K_maximum": 3})
    with pytest.raises(UsageError):
        resolve_params("lp-duality", {"K_max": "many"})


def test_every_suite_has_a_schema():
    for name in suites.SUITES:
        resolve_params(name)


def test_lp_duality_suite_passes():
    outcome = execute_suite("lp-duality", SMALL_LP, seed=1)
    assert outcome.passed
    rows = outcome.tables["lp_duality"]
    assert [r["K"] for r in rows] == [1, 2]
    assert all(r["brute_force"] != "" for r in rows)


def test_artifacts_put_report_first():
    outcome = execute_suite("lp-duality", SMALL_LP, seed=1)
    artifacts = suite_artifacts(outcome)
    assert artifacts[0].filename == "report.json"
    assert artifacts[0].payload["passed"] is True
    assert [a.format for a in artifacts[1:]] == [OutputFormat.CSV]


def test_determinism_suite():
    outcome = execute_suite("determinism", {"target": "lp-duality", "target_params": SMALL_LP}, seed=4)
    assert outcome.checks["identical_outputs"]
    assert {r["file"] for r in outcome.tables["determinism"]} == {"report.json", "lp_duality.csv"}
    with pytest.raises(UsageError):
        execute_suite("determinism", {"target": "determinism"}, seed=4)


def test_leakage_suite_small():
    outcome = execute_suite(
        "leakage",
        {"N_values": [4, 6], "random_queries": 10, "random_trials": 50, "bisection_trials": 50},
        seed=2,
    )
    assert outcome.checks["bisection_identifies"]
    assert outcome.checks["bits_per_query_bounded"]
    assert len(outcome.tables["leakage"]) == 2


def test_gauss_kl_suite_small():
    outcome = execute_suite(
        "gauss-kl", {"kappas": [4, 16], "dims": [16], "eps": [0.3], "spectra": ["uniform"]}, seed=1
    )
    assert outcome.checks["kl_below_eps_squared"]
    assert outcome.checks["query_count_within_budget"]
    assert outcome.reports["fit"]["C"] > 0


def test_wishart_suite_small():
    outcome = execute_suite(
        "wishart",
        {
            "tail_dims": [8], "x_grid": [0.5, 1.0], "tail_trials": 500,
            "variance_dim": 3, "variance_draws": 5000,
            "invtrace_dim": 8, "invtrace_trials": 20, "invtrace_n_grid": [8],
            "posterior_trials": 20,
        },
        seed=3,
    )
    assert outcome.checks["posterior_minorization"]
    assert outcome.checks["tail_monotone_d8"]
    assert outcome.tables["inverse_trace"][0]["success_rate"] == 1.0


def test_reduction_suite_small():
    outcome = execute_suite(
        "reduction",
        {
            "dim": 12, "K": 2, "trials": 20, "algorithms": ["power"], "permutations": 49,
            "hardpair_trials": 0, "conditioning_m": [1], "conditioning_trials": 20,
        },
        seed=5,
    )
    assert outcome.tables["reduction"][0]["P2_max"] < 1e-8
    assert outcome.tables["reduction"][0]["audit_passed"]
    assert [r["m"] for r in outcome.tables["conditioning"]] == [1]


@pytest.mark.slow
def test_kakeya_suite_small():
    outcome = execute_suite(
        "kakeya",
        {
            "N_values": [6], "strings_per_N": 1, "points": 500,
            "coincidence_N": [2], "coincidence_points": 200,
            "render_N": 2, "render_bits": ["00", "11"], "omega_N": 1,
        },
        seed=6,
    )
    for key in ("no_convexity_violations", "no_flat_near_zero_set_violations", "no_growth_violations",
                "no_induction_violations", "exact_coincidence"):
        assert outcome.checks[key]
    assert "kakeya_zero_sets" in outcome.figures
    assert len(outcome.tables["omega_mass"]) == 2


def test_dichotomy_suite_reports_both_pairs():
    outcome = execute_suite(
        "dichotomy",
        {
            "d": 64, "kappa": 16.0, "transcripts": 30, "permutations": 49,
            "coupling_trials": 20, "distinguish_trials": 50,
            "goe_N": [50], "goe_samples": 100,
        },
        seed=8,
    )
    weak, strong = outcome.reports["transcript_test"], outcome.reports["strong_transcript_test"]
    assert strong["c1"] == outcome.reports["distinguisher"]["c1"] == 0.5
    assert (strong["width"], strong["depth"]) == (weak["width"], weak["depth"])
    assert strong["n_a"] == strong["n_b"] == 30
    assert strong["indistinguishable"] == (strong["p_value"] >= 0.05)
