"""Filter the risk-question database down to an audit's scope and derive
ethical concerns from the answers.

Questions are tagged with lifecycle steps and one of the seven
trustworthy-AI requirements. Flagged answers (No, Partial, Unknown) roll up
into one concern per requirement.
"""

from datetime import datetime, timezone

from auditbench import (
    Answer,
    QuestionResponse,
    Requirement,
    derive_concerns,
    filter_questions,
    import_questions,
    instantiate_template,
)
from auditbench.fixtures import sample_question_csv

model = instantiate_template()
db = import_questions(sample_question_csv(), model)
print(f"imported {len(db)} questions, digest {db.digest[:12]}")

scope = {"user_experience", "reliability_assessment"}
retained = filter_questions(db, scope)
print(f"\nretained for scope {sorted(scope)}:")
for q in retained:
    print(f"  [{q.requirement.value}] {q.id}: {q.text}")

now = datetime.now(timezone.utc)
answers = {}
for q in retained:
    if q.id == "altai-t-01":
        answers[q.id] = QuestionResponse(
            question_id=q.id, answer=Answer.NO,
            justification="the interface does not convey output uncertainty",
            answered_by="demo-auditor", timestamp=now,
        )
    elif q.requirement == Requirement.TECHNICAL_ROBUSTNESS_SAFETY:
        answers[q.id] = QuestionResponse(
            question_id=q.id, answer=Answer.PARTIAL,
            justification="planned but not yet executed",
            answered_by="demo-auditor", timestamp=now,
        )
    else:
        answers[q.id] = QuestionResponse(
            question_id=q.id, answer=Answer.YES,
            answered_by="demo-auditor", timestamp=now,
        )

concerns = derive_concerns(retained, answers)
print("\nderived concerns:")
for c in concerns:
    print(f"  {c.requirement.value}: severity {c.severity.value}, "
          f"triggered by {', '.join(c.triggering_responses)}")
