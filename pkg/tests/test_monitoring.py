from __future__ import annotations

import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auditbench import monitoring as mon
from auditbench.errors import ValidationError


def record(rid: str, outcome: int, protected: str | None = "a",
           stratum: str | None = None, label: int | None = None) -> mon.PredictionRecord:
    return mon.PredictionRecord(
        record_id=rid, outcome=outcome, protected=protected, stratum=stratum, label=label
    )


def spec_ci(batch_size: int = 100, threshold: float = 0.95, min_group_size: int = 10,
            stratum_attr: str | None = None, suppress: bool = False) -> mon.MonitorSpec:
    return mon.MonitorSpec(
        id="ci",
        metric=mon.MetricKind.CONDITIONAL_INDEPENDENCE_RATIO,
        batch_size=batch_size,
        threshold=threshold,
        min_group_size=min_group_size,
        stratum_attr=stratum_attr,
        document_failures_only=suppress,
    )


def oracle_ci(window: list[mon.PredictionRecord], spec: mon.MonitorSpec) -> float | None:
    """Brute-force counting oracle over raw records."""
    strata: dict[str | None, dict[str, list[int]]] = {}
    for r in window:
        if r.outcome not in (0, 1) or r.protected is None:
            continue
        if spec.stratum_attr is not None and r.stratum is None:
            continue
        stratum = str(r.stratum) if spec.stratum_attr is not None else None
        groups = strata.setdefault(stratum, {})
        cell = groups.setdefault(str(r.protected), [0, 0])
        cell[0] += r.outcome
        cell[1] += 1
    ratios = []
    for groups in strata.values():
        eligible = {g: (p, n) for g, (p, n) in groups.items() if n >= spec.min_group_size}
        if len(eligible) < 2:
            continue
        rates = [p / n for p, n in eligible.values()]
        ratios.append(1.0 if max(rates) == 0 else min(rates) / max(rates))
    return min(ratios) if ratios else None


def random_window(rng: random.Random, *, n_groups: int, n_strata: int,
                  size: int) -> list[mon.PredictionRecord]:
    groups = [f"g{i}" for i in range(n_groups)]
    strata = [f"s{i}" for i in range(n_strata)] if n_strata else [None]
    return [
        record(
            f"r{i}",
            rng.randint(0, 1),
            protected=rng.choice(groups),
            stratum=rng.choice(strata),
        )
        for i in range(size)
    ]


class TestConditionalIndependenceRatio:
    def test_equal_rates_give_one(self):
        window = (
            [record(f"a{i}", 1 if i < 10 else 0, "a") for i in range(20)]
            + [record(f"b{i}", 1 if i < 10 else 0, "b") for i in range(20)]
        )
        value, details, malformed = mon.conditional_independence_ratio(window, spec_ci())
        assert value == 1.0
        assert malformed == 0
        assert details[0].eligible

    def test_single_eligible_group_indeterminate(self):
        window = [record(f"a{i}", 1, "a") for i in range(20)]
        value, details, _ = mon.conditional_independence_ratio(window, spec_ci())
        assert value is None
        assert not details[0].eligible

    def test_planted_ratio_ten_twelfths(self):
        # group A 12/40 positive, group B 10/40 positive -> ratio 10/12
        window = (
            [record(f"a{i}", 1 if i < 12 else 0, "a") for i in range(40)]
            + [record(f"b{i}", 1 if i < 10 else 0, "b") for i in range(40)]
        )
        value, _, _ = mon.conditional_independence_ratio(window, spec_ci())
        assert value is not None
        assert abs(value - (10 / 40) / (12 / 40)) < 1e-12
        assert abs(value - 0.8333333333333334) < 1e-12

    def test_planted_two_hundred_record_stratified_window(self):
        # 200 records in two strata; the skewed stratum (A 12/40, B 10/40)
        # sets the overall minimum at 10/12, the balanced one scores 1.0
        window = (
            [record(f"s0a{i}", 1 if i < 12 else 0, "a", "s0") for i in range(40)]
            + [record(f"s0b{i}", 1 if i < 10 else 0, "b", "s0") for i in range(40)]
            + [record(f"s1a{i}", 1 if i < 10 else 0, "a", "s1") for i in range(60)]
            + [record(f"s1b{i}", 1 if i < 10 else 0, "b", "s1") for i in range(60)]
        )
        assert len(window) == 200
        spec = spec_ci(batch_size=200, stratum_attr="stratum")
        value, details, _ = mon.conditional_independence_ratio(window, spec)
        assert abs(value - oracle_ci(window, spec)) < 1e-12
        assert abs(value - 10 / 12) < 1e-12
        result = mon.evaluate_batch(window, spec, 0)
        assert result.verdict == mon.BatchVerdict.FAIL  # below the 0.95 default

    def test_paper_default_threshold_trips_on_planted_window(self):
        window = (
            [record(f"a{i}", 1 if i < 12 else 0, "a") for i in range(40)]
            + [record(f"b{i}", 1 if i < 10 else 0, "b") for i in range(40)]
        )
        spec = spec_ci(batch_size=80)
        assert spec.threshold == 0.95  # the shipped default
        result = mon.evaluate_batch(window, spec, 0)
        assert result.verdict == mon.BatchVerdict.FAIL
        relaxed = mon.evaluate_batch(window, spec_ci(batch_size=80, threshold=0.80), 0)
        assert relaxed.verdict == mon.BatchVerdict.PASS

    def test_all_zero_rates_count_as_equal(self):
        window = (
            [record(f"a{i}", 0, "a") for i in range(15)]
            + [record(f"b{i}", 0, "b") for i in range(15)]
        )
        value, _, _ = mon.conditional_independence_ratio(window, spec_ci())
        assert value == 1.0

    def test_small_groups_excluded(self):
        window = (
            [record(f"a{i}", 1, "a") for i in range(15)]
            + [record(f"b{i}", 0, "b") for i in range(5)]  # below min_group_size
            + [record(f"c{i}", i % 2, "c") for i in range(15)]
        )
        value, details, _ = mon.conditional_independence_ratio(window, spec_ci())
        assert set(details[0].rates) == {"a", "c"}
        assert value is not None

    def test_malformed_records_counted_and_excluded(self):
        window = (
            [record(f"a{i}", 1 if i < 6 else 0, "a") for i in range(12)]
            + [record(f"b{i}", 1 if i < 6 else 0, "b") for i in range(12)]
            + [record("x1", 1, protected=None), record("x2", 0, protected=None)]
        )
        value, _, malformed = mon.conditional_independence_ratio(window, spec_ci())
        assert malformed == 2
        assert value == 1.0

    def test_stratified_takes_worst_stratum(self):
        window = []
        # stratum s0: equal rates; stratum s1: 0.25 vs 0.5
        for i in range(20):
            window.append(record(f"s0a{i}", 1 if i < 10 else 0, "a", "s0"))
            window.append(record(f"s0b{i}", 1 if i < 10 else 0, "b", "s0"))
        for i in range(20):
            window.append(record(f"s1a{i}", 1 if i < 5 else 0, "a", "s1"))
            window.append(record(f"s1b{i}", 1 if i < 10 else 0, "b", "s1"))
        value, details, _ = mon.conditional_independence_ratio(
            window, spec_ci(stratum_attr="stratum")
        )
        assert value == 0.5
        assert {d.stratum for d in details} == {"s0", "s1"}

    def test_empty_window_rejected(self):
        with pytest.raises(ValidationError):
            mon.conditional_independence_ratio([], spec_ci())

    def test_randomized_windows_match_oracle(self):
        rng = random.Random(42)
        for _ in range(200):
            window = random_window(
                rng,
                n_groups=rng.randint(2, 5),
                n_strata=rng.randint(0, 4),
                size=rng.randint(10, 300),
            )
            spec = spec_ci(
                min_group_size=rng.choice([1, 5, 10, 25]),
                stratum_attr="stratum" if window[0].stratum is not None else None,
            )
            value, _, _ = mon.conditional_independence_ratio(window, spec)
            expected = oracle_ci(window, spec)
            if expected is None:
                assert value is None
            else:
                assert value is not None
                assert math.isclose(value, expected, abs_tol=1e-12)

    def test_permutation_invariance(self):
        rng = random.Random(17)
        window = random_window(rng, n_groups=3, n_strata=2, size=120)
        spec = spec_ci(stratum_attr="stratum")
        value, _, _ = mon.conditional_independence_ratio(window, spec)
        shuffled = list(window)
        rng.shuffle(shuffled)
        value2, _, _ = mon.conditional_independence_ratio(shuffled, spec)
        assert value == value2

    def test_group_relabeling_invariance(self):
        rng = random.Random(18)
        window = random_window(rng, n_groups=3, n_strata=0, size=90)
        value, _, _ = mon.conditional_independence_ratio(window, spec_ci())
        relabeled = [
            mon.PredictionRecord(
                record_id=r.record_id, outcome=r.outcome,
                protected={"g0": "zebra", "g1": "apple", "g2": "mango"}[r.protected],
            )
            for r in window
        ]
        value2, _, _ = mon.conditional_independence_ratio(relabeled, spec_ci())
        assert value == value2

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000),
           k=st.integers(min_value=2, max_value=4))
    def test_duplication_invariance(self, seed, k):
        rng = random.Random(seed)
        window = random_window(rng, n_groups=3, n_strata=1, size=60)
        spec = spec_ci(stratum_attr="stratum")
        value, _, _ = mon.conditional_independence_ratio(window, spec)
        duplicated = [
            mon.PredictionRecord(
                record_id=f"{r.record_id}-{j}", outcome=r.outcome,
                protected=r.protected, stratum=r.stratum,
            )
            for r in window for j in range(k)
        ]
        value_dup, _, _ = mon.conditional_independence_ratio(duplicated, spec)
        if value is None:
            assert value_dup is None
        else:
            assert math.isclose(value, value_dup, abs_tol=1e-12)

    def test_value_bounds_and_equality_condition(self):
        rng = random.Random(55)
        for _ in range(100):
            window = random_window(rng, n_groups=3, n_strata=1, size=80)
            spec = spec_ci(stratum_attr="stratum", min_group_size=5)
            value, details, _ = mon.conditional_independence_ratio(window, spec)
            if value is None:
                continue
            assert 0.0 <= value <= 1.0
            all_equal = all(
                len(set(d.rates.values())) <= 1 for d in details if d.eligible
            )
            assert (value == 1.0) == all_equal

    def test_raising_min_group_size_shrinks_group_sets(self):
        rng = random.Random(66)
        window = random_window(rng, n_groups=5, n_strata=1, size=150)
        previous_groups: set[str] | None = None
        for size in (1, 5, 10, 20, 50):
            spec = spec_ci(stratum_attr="stratum", min_group_size=size)
            _, details, _ = mon.conditional_independence_ratio(window, spec)
            groups = {g for d in details for g in d.rates}
            if previous_groups is not None:
                assert groups <= previous_groups
            previous_groups = groups


class TestErrorRate:
    def test_perfect_agreement(self):
        window = [record(f"r{i}", i % 2, label=i % 2) for i in range(50)]
        assert mon.error_rate(window) == 0.0

    def test_no_labels_indeterminate(self):
        window = [record(f"r{i}", 1) for i in range(50)]
        assert mon.error_rate(window) is None

    def test_partial_labels(self):
        window = [
            record("r1", 1, label=0),
            record("r2", 1, label=1),
            record("r3", 0),  # unlabeled, ignored
        ]
        assert mon.error_rate(window) == 0.5

    def test_random_windows_match_mismatch_oracle(self):
        rng = random.Random(77)
        window = [
            record(
                f"r{i}", rng.randint(0, 1),
                label=rng.randint(0, 1) if rng.random() < 0.8 else None,
            )
            for i in range(1000)
        ]
        labeled = [r for r in window if r.label is not None]
        mismatches = sum(1 for r in labeled if r.outcome != r.label)
        assert mon.error_rate(window) == mismatches / len(labeled)

    def test_error_rate_spec_direction(self):
        spec = mon.MonitorSpec(
            id="er", metric=mon.MetricKind.ERROR_RATE, batch_size=10, threshold=0.1
        )
        window = [record(f"r{i}", 1, label=0) for i in range(10)]
        result = mon.evaluate_batch(window, spec, 0)
        assert result.value == 1.0
        assert result.verdict == mon.BatchVerdict.FAIL
        clean = [record(f"r{i}", 1, label=1) for i in range(10)]
        assert mon.evaluate_batch(clean, spec, 0).verdict == mon.BatchVerdict.PASS

    def test_wrong_direction_rejected(self):
        with pytest.raises(ValidationError):
            mon.MonitorSpec(
                id="bad", metric=mon.MetricKind.ERROR_RATE, batch_size=10,
                threshold=0.1, direction=mon.Direction.FAIL_BELOW,
            ).validate()


def make_batch(prefix: str, rate_a: float, rate_b: float, half: int = 20) -> list[mon.PredictionRecord]:
    batch = []
    for i in range(half):
        batch.append(record(f"{prefix}a{i}", 1 if i < rate_a * half else 0, "a"))
    for i in range(half):
        batch.append(record(f"{prefix}b{i}", 1 if i < rate_b * half else 0, "b"))
    return batch


class TestRunMonitor:
    def test_all_passing_suppressed(self):
        spec = spec_ci(batch_size=40, suppress=True)
        log = make_batch("b0", 0.5, 0.5) + make_batch("b1", 0.5, 0.5) + make_batch("b2", 0.5, 0.5)
        run = mon.run_monitor(spec, log)
        assert run.batch_count == 3
        assert run.pass_count == 3
        assert run.results == ()

    def test_partial_tail_indeterminate(self):
        spec = spec_ci(batch_size=40)
        log = make_batch("b0", 0.5, 0.5) + make_batch("b1", 0.5, 0.5) + make_batch("b2", 0.5, 0.5)[:17]
        run = mon.run_monitor(spec, log)
        assert run.batch_count == 3
        assert run.indeterminate_count == 1
        tail = run.results[-1]
        assert tail.verdict == mon.BatchVerdict.INDETERMINATE
        assert tail.window[2] == 17
        assert tail.value is None

    def test_planted_failing_batch_seven(self):
        spec = spec_ci(batch_size=40, suppress=True)
        log: list[mon.PredictionRecord] = []
        for b in range(10):
            if b == 7:
                log.extend(make_batch(f"b{b}", 0.9, 0.3))
            else:
                log.extend(make_batch(f"b{b}", 0.5, 0.5))
        run = mon.run_monitor(spec, log)
        assert run.fail_count == 1
        assert [r.batch_index for r in run.results] == [7]
        # per-batch values equal the single-window oracle applied to each slice
        full = mon.run_monitor(spec_ci(batch_size=40), log)
        for result in full.results:
            window = log[result.batch_index * 40:(result.batch_index + 1) * 40]
            expected = oracle_ci(window, spec)
            if expected is None:
                assert result.value is None
            else:
                assert math.isclose(result.value, expected, abs_tol=1e-12)

    def test_fail_and_indeterminate_always_emitted(self):
        spec = spec_ci(batch_size=40, suppress=True)
        log = make_batch("b0", 0.9, 0.3) + make_batch("b1", 0.5, 0.5)[:11]
        run = mon.run_monitor(spec, log)
        verdicts = [r.verdict for r in run.results]
        assert verdicts == [mon.BatchVerdict.FAIL, mon.BatchVerdict.INDETERMINATE]

    def test_stream_batch_equivalence(self):
        rng = random.Random(101)
        spec = spec_ci(batch_size=50)
        log = random_window(rng, n_groups=3, n_strata=0, size=50 * 12)
        whole = mon.run_monitor(spec, log)
        pieces = []
        for start in range(0, len(log), 50):
            pieces.extend(mon.run_monitor(spec, log[start:start + 50]).results)
        assert len(whole.results) == len(pieces)
        for got, piece in zip(whole.results, pieces):
            assert got.value == piece.value
            assert got.verdict == piece.verdict
            assert got.window[0] == piece.window[0]
            assert got.window[1] == piece.window[1]

    def test_verdict_fail_iff_threshold_violated(self):
        rng = random.Random(103)
        spec = spec_ci(batch_size=30)
        log = random_window(rng, n_groups=2, n_strata=0, size=30 * 20)
        run = mon.run_monitor(spec, log)
        for result in run.results:
            if result.value is None:
                assert result.verdict == mon.BatchVerdict.INDETERMINATE
            elif result.value < spec.threshold:
                assert result.verdict == mon.BatchVerdict.FAIL
            else:
                assert result.verdict == mon.BatchVerdict.PASS


class TestLogParsing:
    def test_ndjson_roundtrip(self):
        lines = [
            json.dumps({"record_id": "r1", "timestamp": "2024-06-01T00:00:00Z",
                        "outcome": 1, "protected": "a", "stratum": "s1", "label": 1}),
            json.dumps({"record_id": "r2", "outcome": 0, "protected": "b"}),
        ]
        records = mon.parse_prediction_log("\n".join(lines))
        assert records[0].record_id == "r1"
        assert records[0].stratum == "s1"
        assert records[1].label is None

    def test_bad_outcome_rejected(self):
        with pytest.raises(ValidationError, match="outcome"):
            mon.parse_prediction_log(json.dumps({"record_id": "r1", "outcome": 2}))

    def test_bad_json_names_line(self):
        with pytest.raises(ValidationError, match="line 2"):
            mon.parse_prediction_log('{"record_id": "r1", "outcome": 1}\nnot json')

    def test_extra_fields_kept_as_extras(self):
        records = mon.parse_prediction_log(
            json.dumps({"record_id": "r1", "outcome": 1, "site": "x"})
        )
        assert records[0].get("site") == "x"
