from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from auditbench import lifecycle as lc

T0 = datetime(2024, 6, 1, 8, 0, tzinfo=timezone.utc)


def ts(minutes: int = 0) -> datetime:
    return T0 + timedelta(minutes=minutes)


def assessment(
    model: lc.LifecycleModel,
    step_id: str,
    status: lc.StepStatus,
    rationale: str = "assessed in test",
    actor: str = "tester",
    minutes: int = 0,
) -> lc.StepAssessment:
    return lc.StepAssessment(
        step_id=step_id,
        status=status,
        rationale=rationale,
        assessed_by=actor,
        timestamp=ts(minutes),
        expected_revision=model.revision,
    )


def assess(model: lc.LifecycleModel, step_id: str, status: lc.StepStatus,
           rationale: str = "assessed in test") -> lc.LifecycleModel:
    return lc.assess_step(model, assessment(model, step_id, status, rationale))


@pytest.fixture
def model() -> lc.LifecycleModel:
    return lc.instantiate_template()
