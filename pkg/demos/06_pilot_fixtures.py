"""Load the two shipped pilot fixtures and inspect what they encode.

The calibration pilot arrives in Reporting with its questionnaire answered
and three concerns derived; the care-robot pilot is an early-stage audit
still in Planning, with data and model work not yet auditable.
"""

from datetime import datetime, timezone

from auditbench import Store, Workbench, coverage
from auditbench.canonical import format_fraction
from auditbench.fixtures import load_pilot, sample_register_entries
from auditbench.reporting import compile_report

for name in ("calibration", "garmi"):
    audit = load_pilot(name)
    iteration = audit.open_iteration()
    print(f"== {name}: {audit.title} [{audit.kind.value}]")
    print(f"   phase: {iteration.phase.value}")
    report = coverage(audit.model)
    print(f"   coverage: {format_fraction(report.overall)}")
    for phase in audit.model.phases:
        pc = report.per_phase[phase.id]
        print(f"     {phase.id:12s} blue={pc.blue} yellow={pc.yellow} "
              f"white={pc.white} grey={pc.pending}")
    if iteration.concerns:
        print("   concerns:",
              [(c.requirement.value, c.severity.value) for c in iteration.concerns])
    print()

# The calibration pilot is ready to compile.
audit = load_pilot("calibration")
_, doc = compile_report(audit, at=datetime(2024, 6, 1, tzinfo=timezone.utc))
print("calibration report digest:", doc["content_digest"][:16])
print("recommendations:")
for item in doc["recommendations"]:
    rec = item["recommendation"]
    print(f"  - [{rec['status']}] {rec['text'][:70]}...")

# The sample risk register entries are queryable from any scoped audit.
bench = Workbench(store=Store())
for entry in sample_register_entries():
    bench.add_register_entry(entry)
hits = bench.query_register({"user_experience"})
print("\nregister entries keyed to user_experience:")
for entry in hits:
    print(f"  - {entry.id}: {entry.title}")
