"""Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned."""

import json
import math
import random
import time
from collections import Counter
from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest

from crowdsim.analytics import (
    avg_relative_velocity,
    avg_response_time,
    avg_submission_ratio,
    mean_relative_error,
    quality_metrics,
    relative_velocity,
    response_time,
    team_elasticity,
)
from crowdsim.cli import main
from crowdsim.config import SimulationConfig, TaskTemplate, dump_config, echo_config, load_config
from crowdsim.domain import Lifecycle, Task, WorkerTaskRecord
from crowdsim.engine import check_invariants, run, should_register
from crowdsim.history import emit_history, load_history
from crowdsim.predictor import (
    Phase,
    PredictionState,
    PredictorEvent,
    fpr,
    fps,
    predict_submissions,
    task_completion_ratio,
    task_failure_ratio,
    task_submission_ratio,
)
from crowdsim.reports import dumps, emit_run, scenario_document
from crowdsim.rng import RngStreams, scaled_beta, triangular
from crowdsim.scenario import (
    POLICY_SETS,
    ScenarioReport,
    compare_policies,
    motivation_config,
    mre_vs_reference,
    run_replications,
    two_proportion_z,
)
from crowdsim.scheduling import ScheduleEntry, effort_record, etpt, etst, mett, project_duration
from crowdsim.similarity import Corpus, cosine, idf, tf, tfidf_weight, tokenize

ALPHA = 0.05
SCENARIO_SEED = 20240601
SCENARIO_REPS = 60
SWEEP_REPS = 30


# 1. formula oracles --------------------------------------------------------

def _bf_fpr(res):
    pairs = [(Fraction(r).limit_denominator(1000), 1 - Fraction(r).limit_denominator(1000)) for r in res]
    total = sum(r for r, _ in pairs)
    div = 3 if total > 2 else 2 if total > 1 else 1
    return float(sum(r * p for r, p in pairs) / div)


def _bf_cosine(u, v):
    u, v = np.asarray(u, float), np.asarray(v, float)
    return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


def _task(start, end):
    return Task("T", "P", start, end)


def _oracle_cases():
    corpus = Corpus.from_tokens({"a": ["x", "y"], "b": ["y"], "c": ["y", "z"]})
    doc = ["q", "q", "r", "r", "r", "r"]
    corpus2 = Corpus.from_tokens({"d0": doc, "d1": ["s"], "d2": ["s", "t"]})
    seq = [ScheduleEntry("a", 0, 16), ScheduleEntry("b", 16, 21)]
    par = [ScheduleEntry("c", 2, 10), ScheduleEntry("d", 3, 12)]
    return [
        ("fpr {0.9,0.9,0.7}", lambda: fpr([(r, 1 - r) for r in (0.9, 0.9, 0.7)]), _bf_fpr((0.9, 0.9, 0.7))),
        ("fpr {0.8,0.7}", lambda: fpr([(r, 1 - r) for r in (0.8, 0.7)]), _bf_fpr((0.8, 0.7))),
        ("fpr {0}", lambda: fpr([(0.0, 1.0)]), 0.0),
        ("fpr {0.3}", lambda: fpr([(0.3, 0.7)]), _bf_fpr((0.3,))),
        ("fps 0", lambda: fps(0.0), 0.014),
        ("fps 0.25", lambda: fps(0.25), 0.0473 * 0.25 + 0.014),
        ("fps 0.25 pct", lambda: fps(0.25, 100.0), 1.0),
        ("tcr 5/20", lambda: task_completion_ratio(5, 20), 5 / 20),
        ("tfr 87/100", lambda: task_failure_ratio(87, 100), 1 - 87 / 100),
        ("tsr 3/36", lambda: task_submission_ratio(3, 36), 3 / 36),
        ("MRE 10 vs 9", lambda: mean_relative_error([4, 6], [4, 5]).absolute, (10 - 9) / 10),
        ("regression zeros", lambda: predict_submissions(0, 0, 0, 0), 2.768),
        ("regression parallel", lambda: predict_submissions(1, 0, 0, 0), 2.768 + 1.0),
        ("regression registrants", lambda: predict_submissions(0, 1000, 0, 0), 2.768 - 1.0),
        ("IDF 1 of 3", lambda: idf("x", corpus), 3 / 1),
        ("TF 2 over 4", lambda: tf("q", doc), Counter(doc)["q"] / max(Counter(doc).values())),
        ("TF-IDF", lambda: tfidf_weight("q", doc, corpus2), math.log10(3) / (12 + math.log10(12 * 0.5))),
        ("tokenize", lambda: float(tokenize("Build THE API build") == ["build", "api", "build"]), 1.0),
        ("cosine (1,0,1)(1,1,0)", lambda: cosine((1, 0, 1), (1, 1, 0)), _bf_cosine((1, 0, 1), (1, 1, 0))),
        ("cosine random", lambda: cosine((0.3, 0.1, 0.9, 0.4), (0.2, 0.8, 0.5, 0.1)),
         _bf_cosine((0.3, 0.1, 0.9, 0.4), (0.2, 0.8, 0.5, 0.1))),
        ("METT", lambda: mett(ScheduleEntry("x", 4, 20)), 20 - 4),
        ("ETST", lambda: etst(seq), (16 - 0) + (21 - 16)),
        ("ETPT", lambda: etpt(par), max(10, 12) - min(2, 3)),
        ("PD", lambda: project_duration(seq + [ScheduleEntry("c", 30, 35), ScheduleEntry("d", 32, 40)]), 21 + 10),
        ("RT", lambda: response_time(WorkerTaskRecord("W", "T", 3.0), _task(1.0, 9.0)), 3.0 - 1.0),
        ("ART", lambda: avg_response_time({1: [0.5, 1.5]})[1], (0.5 + 1.5) / 2),
        ("ASR", lambda: avg_submission_ratio({"g": [(3, 5), (1, 5)]})["g"], (0.6 + 0.2) / 2),
        ("RV", lambda: relative_velocity(WorkerTaskRecord("W", "T", 0.0, 8.0), _task(0.0, 16.0)), 8 / 16),
        ("ARV", lambda: avg_relative_velocity({"g": [(8, 16), (4, 16)]})["g"], (8 + 4) / (16 + 16)),
        ("Q", lambda: quality_metrics({"g": {"W": [80, 90, 100]}}).per_worker["W"], (80 + 90 + 100) / 3),
        ("AQ", lambda: quality_metrics({"g": {"A": [80], "B": [None]}}).per_group["g"], (80 + 0) / 2),
        ("TE", lambda: team_elasticity([40, 10, 20]), 40 / 10),
    ]


def test_criterion_1_formula_oracles(verdict):
    t0 = time.perf_counter()
    cases = _oracle_cases()
    misses = [name for name, got, want in cases if abs(got() - want) > 1e-9]
    elapsed = time.perf_counter() - t0
    ok = len(cases) >= 20 and not misses and elapsed < 1.0
    verdict("1 formula oracles", ok, f"{len(cases)} cases, misses={misses}, {elapsed:.3f}s")
    assert ok


# 2. effort table -----------------------------------------------------------

TABLE_EFFORT = (
    # effort, actual, (D_I, D_II, D_III), avg SAR
    (273.0, 9.0, (17.7, 16.5, 19.1), 1.97),
    (501.7, 13.0, (20.9, 22.4, 23.3), 1.7),
    (388.8, 11.0, (19.5, 19.7, 21.5), 1.87),
    (629.1, 14.0, (22.3, 25.1, 25.2), 1.73),
)


def test_criterion_2_effort_table(verdict):
    t0 = time.perf_counter()
    # the table averages SARs already printed to one decimal
    rows = [effort_record(str(i), e, a, sar_decimals=1) for i, (e, a, _, _) in enumerate(TABLE_EFFORT)]
    dur_err = max(
        abs(got - want)
        for r, (_, _, durs, _) in zip(rows, TABLE_EFFORT)
        for got, want in zip((r.duration_i, r.duration_ii, r.duration_iii), durs)
    )
    sar_err = max(abs(r.avg_sar - want) for r, (*_, want) in zip(rows, TABLE_EFFORT))
    overall = sum(r.avg_sar for r in rows) / len(rows)
    elapsed = time.perf_counter() - t0
    ok = dur_err <= 0.1 and sar_err <= 0.02 and abs(overall - 1.82) <= 0.02 and elapsed < 1.0
    verdict("2 effort table", ok, f"max duration err {dur_err:.3f}, max avg-SAR err {sar_err:.4f}, overall {overall:.4f}")
    assert ok


# 3. determinism ------------------------------------------------------------

def test_criterion_3_determinism(tmp_path, verdict):
    t0 = time.perf_counter()
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 42\nhorizon: 20\n")
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    traces_same = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in ("trace.csv", "trace.jsonl")
    )

    small = motivation_config(
        seed=7, horizon=12.0, schedule=(TaskTemplate("T1", 1.0, 8.0),), target_task="T1"
    )
    policy = POLICY_SETS["similarity"][0]
    chunks = [
        run_replications(small, policy, 10, start=0, workers=2),
        run_replications(small, policy, 10, start=10),
        run_replications(small, policy, 10, start=20, workers=2),
    ]
    docs = set()
    for order in permutations(range(3)):
        merged = chunks[order[0]].merge(chunks[order[1]]).merge(chunks[order[2]])
        docs.add(dumps(scenario_document([merged])))
    whole = dumps(scenario_document([run_replications(small, policy, 30)]))
    elapsed = time.perf_counter() - t0
    ok = traces_same and docs == {whole} and elapsed < 10.0
    verdict("3 determinism", ok, f"traces identical={traces_same}, distinct merged documents={len(docs)}, {elapsed:.1f}s")
    assert ok


# 4-6. default-config sweep --------------------------------------------------

@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    cfg = SimulationConfig(seed=2024, horizon=60.0)
    results = [run(cfg, rep) for rep in range(SWEEP_REPS)]
    return results, time.perf_counter() - t0


def test_criterion_4_invariant_sweep(sweep, verdict):
    results, elapsed = sweep
    t0 = time.perf_counter()
    problems = [p for r in results for p in check_invariants(r)]
    elapsed += time.perf_counter() - t0
    ok = not problems and elapsed < 30.0
    verdict("4 invariant sweep", ok, f"{SWEEP_REPS} reps x 60 days, {len(problems)} violations, {elapsed:.1f}s")
    assert ok


def test_criterion_5_distributions(sweep, verdict):
    results, _ = sweep
    t0 = time.perf_counter()
    cfg = SimulationConfig(seed=5)
    streams = RngStreams(5)
    n = 10_000
    tri = [triangular(streams.durations, cfg.duration) for _ in range(n)]
    beta_mean = sum(scaled_beta(streams.experience, cfg.experience) for _ in range(n)) / n
    # over-cap gate driven by the engine's decision stream semantics
    rng = random.Random(11)
    accepted = sum(should_register(0.95, 25, rng.random()) for _ in range(n)) / n
    engine_attempts = sum(r.stats["over_cap_attempts"] for r in results)
    engine_rate = sum(r.stats["over_cap_accepted"] for r in results) / engine_attempts
    ticks = sum(r.stats["submission_ticks"] for r in results)
    worker_days = sum(r.stats["active_worker_days"] for r in results)
    per_day = ticks / worker_days
    elapsed = time.perf_counter() - t0
    checks = {
        "triangular in [1,30]": min(tri) >= 1.0 and max(tri) <= 30.0,
        "rating mean in [450,550]": 450 <= beta_mean <= 550,
        "over-cap acceptance in [0.2,0.4]": 0.2 <= accepted <= 0.4 and 0.2 <= engine_rate <= 0.4 and engine_attempts >= 200,
        "submission events/worker-day in [0.4,0.62]": 0.4 <= per_day <= 0.62,
    }
    ok = all(checks.values()) and elapsed < 30.0
    verdict(
        "5 distribution conformance",
        ok,
        f"tri [{min(tri):.2f},{max(tri):.2f}], rating mean {beta_mean:.1f}, over-cap {accepted:.3f} "
        f"(engine {engine_rate:.3f} over {engine_attempts}), sub events/worker-day {per_day:.3f}",
    )
    assert ok, {k: v for k, v in checks.items() if not v}


def test_criterion_6_success_band(sweep, verdict):
    results, _ = sweep
    ratios = [r.stats["success_ratio"] for r in results]
    mean = sum(ratios) / len(ratios)
    ok = 0.50 <= mean <= 0.90
    verdict("6 platform success band (soft)", ok, f"mean success ratio {mean:.3f} over {len(ratios)} reps")
    assert ok


# 7-8. scenario orderings ---------------------------------------------------

def _scenario(kind, indices):
    cfg = motivation_config(seed=SCENARIO_SEED)
    return {i: run_replications(cfg, POLICY_SETS[kind][i], SCENARIO_REPS) for i in indices}


def _lower(better: ScenarioReport, worse: ScenarioReport) -> tuple[bool, str]:
    z, p = two_proportion_z(better.fails, better.replications, worse.fails, worse.replications)
    ok = better.failure_rate < worse.failure_rate and p < ALPHA
    return ok, f"{better.policy.name} {better.failure_rate:.2f} < {worse.policy.name} {worse.failure_rate:.2f} (z={z:.2f}, p={p:.2g})"


def test_criterion_7_similarity_ordering(verdict):
    reps = _scenario("similarity", (0, 2))
    ok, detail = _lower(reps[0], reps[2])
    ordering, _, _ = compare_policies(list(reps.values()))
    verdict("7 similarity 0.6 below 0.8 (soft)", ok and ordering[0] == "TP1", f"{detail}, n={SCENARIO_REPS}")
    assert ok


def test_criterion_8_belt_ordering(verdict):
    reps = _scenario("belt", (0, 1, 2))
    ok_all, d_all = _lower(reps[2], reps[0])
    ok_blue, d_blue = _lower(reps[1], reps[0])
    ok = ok_all and ok_blue
    verdict("8 wider belt access below Red+Yellow (soft)", ok, f"{d_all}; {d_blue}; n={SCENARIO_REPS}")
    assert ok


# 9. MRE harness ------------------------------------------------------------

def test_criterion_9_mre_harness(verdict):
    t0 = time.perf_counter()
    # predictor output for a scripted task, split by phase
    state = PredictionState("T")
    script = [(0.5 * i, Lifecycle.REGISTER, 0.05 + 0.03 * i) for i in range(12)]
    script += [(6.0 + i, Lifecycle.SUBMIT, None) for i in range(4)]
    for t, kind, rel in script:
        state.advance(PredictorEvent(t, kind, reliability=rel))
    reg_fp = [v for _, ph, v in state.history if ph is Phase.REGISTRATION]
    sub_fp = [v for _, ph, v in state.history if ph is Phase.SUBMISSION]
    # actual-failure series built to the target error: sum(AF) = sum(FP) / (1 - mre)
    targets = (0.011, 0.02)
    actual = []
    for fp_series, target in zip((reg_fp, sub_fp), targets):
        scale = 1.0 / (1.0 - target)
        actual.append([v * scale for v in fp_series])
    reg, sub = mre_vs_reference((reg_fp, sub_fp), (actual[0], actual[1]))
    elapsed = time.perf_counter() - t0
    ok = abs(reg.absolute - 0.011) <= 1e-9 and abs(sub.absolute - 0.02) <= 1e-9 and elapsed < 1.0
    verdict("9 MRE harness", ok, f"registration {reg.absolute:.6f}, submission {sub.absolute:.6f}")
    assert ok


# 10. I/O -------------------------------------------------------------------

def test_criterion_10_io(history_dir, tmp_path, verdict):
    t0 = time.perf_counter()
    first = load_history(history_dir)
    emit_history(first, tmp_path / "h1")
    second = load_history(tmp_path / "h1")
    emit_history(second, tmp_path / "h2")
    history_ok = first.same_tables(second) and all(
        (tmp_path / "h1" / f).read_bytes() == (tmp_path / "h2" / f).read_bytes()
        for f in ("tasks.csv", "worker_tasks.csv", "workers.csv")
    )

    src = tmp_path / "run.yaml"
    src.write_text("seed: 9\nreview_pass_score: 70\n")
    once = echo_config(load_config(src), tmp_path / "e1")
    twice = echo_config(load_config(once), tmp_path / "e2")
    echo_ok = once.read_bytes() == twice.read_bytes() and dump_config(load_config(twice)) == twice.read_text()

    cfg = SimulationConfig(seed=3, horizon=10.0)
    emit_run(run(cfg), tmp_path / "r1")
    emit_run(run(cfg), tmp_path / "r2")
    csv_ok = all(
        f.read_bytes() == (tmp_path / "r2" / f.name).read_bytes() for f in (tmp_path / "r1").iterdir()
    )
    elapsed = time.perf_counter() - t0
    ok = history_ok and echo_ok and csv_ok and elapsed < 5.0
    verdict("10 round-trip and fixed-point I/O", ok, f"history={history_ok}, echo={echo_ok}, csv={csv_ok}, {elapsed:.2f}s")
    assert ok
