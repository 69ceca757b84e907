"""Scope an audit on the lifecycle map and watch coverage move.

The default template has four phases and 26 steps. Scoping decisions are
colored: blue = audited, yellow = not relevant, white = could not audit,
grey = still pending. Coverage counts blue against blue+white+grey.
"""

from datetime import datetime, timezone

from auditbench import (
    StepAssessment,
    StepStatus,
    coverage,
    instantiate_template,
)
from auditbench import assess_model_step

model = instantiate_template()
print("phases:", [p.title for p in model.phases])
print("steps:", len(model.step_ids()))

now = datetime.now(timezone.utc)


def scope(model, step_id, status, rationale):
    return assess_model_step(
        model,
        StepAssessment(
            step_id=step_id,
            status=status,
            rationale=rationale,
            assessed_by="demo-auditor",
            timestamp=now,
            expected_revision=model.revision,
        ),
    )


# A small pragmatic scope: audit the formulation, skip legacy data work,
# admit that the model's training history is gone.
model = scope(model, "goals", StepStatus.IN_SCOPE, "primary audit target")
model = scope(model, "user_experience", StepStatus.IN_SCOPE, "operator-facing")
model = scope(model, "data_collection", StepStatus.NOT_RELEVANT, "legacy pipeline")
model = scope(model, "training_optimisation", StepStatus.NOT_AUDITABLE,
              "artifacts not accessible anymore")

print("\ncolor map (changed steps):")
for step_id, color in model.color_map().items():
    if color != "grey":
        print(f"  {step_id:24s} {color}")

report = coverage(model)
print("\ncoverage per phase:")
for phase_id, pc in report.per_phase.items():
    shown = pc.fraction if pc.fraction is not None else "undefined"
    print(f"  {phase_id:12s} blue={pc.blue} yellow={pc.yellow} "
          f"white={pc.white} grey={pc.pending} -> {shown}")
print("overall:", report.overall)

# Every write is revision-checked; a stale writer is rejected.
from auditbench import ConflictError

stale = StepAssessment(
    step_id="goals", status=StepStatus.NOT_RELEVANT, rationale="changed my mind",
    assessed_by="someone-else", timestamp=now, expected_revision=1,
)
try:
    assess_model_step(model, stale)
except ConflictError as exc:
    print("\nconcurrent edit rejected:", exc)
