"""Batch monitoring between audit iterations.

A log of binary decisions is cut into fixed-size batches. Per batch, the
conditional-independence ratio compares positive-decision rates across
protected groups (within each stratum of a legitimate attribute) and takes
the worst group ratio; the documented default flags batches below 95%.
Healthy batches can be suppressed to counters so only failures are
documented in full.
"""

from auditbench import (
    MetricKind,
    MonitorSpec,
    PredictionRecord,
    conditional_independence_ratio,
    error_rate,
    run_monitor,
)


def synth_batch(prefix: str, rate_a: float, rate_b: float, half: int = 50):
    """Exact positives per group, so the planted drift is the only failure."""
    records = []
    for i in range(half):
        records.append(PredictionRecord(
            record_id=f"{prefix}-a{i}", outcome=1 if i < rate_a * half else 0,
            protected="group-a", label=1,
        ))
        records.append(PredictionRecord(
            record_id=f"{prefix}-b{i}", outcome=1 if i < rate_b * half else 0,
            protected="group-b", label=1,
        ))
    return records


# Ten batches; batch 7 drifts badly for group B.
log = []
for batch in range(10):
    rate_b = 0.2 if batch == 7 else 0.5
    log.extend(synth_batch(f"b{batch}", 0.5, rate_b))

spec = MonitorSpec(
    id="parity-watch",
    metric=MetricKind.CONDITIONAL_INDEPENDENCE_RATIO,
    batch_size=100,
    document_failures_only=True,
)
print("threshold:", spec.threshold, "| direction:", spec.resolved_direction().value)

run = run_monitor(spec, log)
print(f"\n{run.batch_count} batches: {run.pass_count} pass, "
      f"{run.fail_count} fail, {run.indeterminate_count} indeterminate")
for result in run.results:
    print(f"  batch {result.batch_index}: {result.verdict.value}, "
          f"ratio {result.value:.4f}" if result.value is not None else
          f"  batch {result.batch_index}: {result.verdict.value}")

# Single-window detail per stratum.
value, details, malformed = conditional_independence_ratio(log[700:800], spec)
print("\nworst batch detail:")
for d in details:
    print(f"  stratum={d.stratum} rates={ {g: round(r, 3) for g, r in d.rates.items()} } "
          f"ratio={d.ratio:.4f}")

print("\nerror rate over the whole log:", round(error_rate(log), 4))
