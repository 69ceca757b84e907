from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auditbench import lifecycle as lc
from auditbench import risk_assessment as ra
from auditbench.canonical import digest_doc
from auditbench.errors import ValidationError
from auditbench.fixtures import sample_question_csv

from conftest import ts

REQUIREMENTS = list(ra.Requirement)


def make_question(qid: str, requirement: ra.Requirement, tags: set[str],
                  mandatory: bool = False) -> ra.RiskQuestion:
    return ra.RiskQuestion(
        id=qid,
        text=f"Synthetic question {qid}?",
        requirement=requirement,
        step_tags=frozenset(tags),
        source="synthetic",
        mandatory=mandatory,
    )


def db_of(questions: list[ra.RiskQuestion]) -> ra.QuestionDB:
    ordered = tuple(sorted(questions, key=ra.RiskQuestion.sort_key))
    return ra.QuestionDB(questions=ordered, digest=digest_doc([q.to_doc() for q in ordered]))


def response(qid: str, answer: ra.Answer, justification: str = "because") -> ra.QuestionResponse:
    return ra.QuestionResponse(
        question_id=qid, answer=answer, justification=justification,
        answered_by="tester", timestamp=ts(),
    )


class TestImport:
    def test_sample_csv_imports(self, model):
        db = ra.import_questions(sample_question_csv(), model)
        assert len(db) == 15
        explain = db.by_id()["altai-t-01"]
        assert explain.text == "Did you explain the decision(s) of the AI system to the users?"
        assert explain.requirement == ra.Requirement.TRANSPARENCY
        assert explain.step_tags == frozenset({"user_experience"})

    def test_empty_document(self, model):
        db = ra.import_questions("", model)
        assert len(db) == 0
        assert db.digest == digest_doc([])

    def test_csv_and_json_forms_equivalent(self, model):
        db_csv = ra.import_questions(sample_question_csv(), model)
        as_json = ra.export_questions(list(db_csv.questions), "json")
        db_json = ra.import_questions(as_json, model)
        assert db_json == db_csv

    def test_csv_roundtrip(self, model):
        db = ra.import_questions(sample_question_csv(), model)
        again = ra.import_questions(ra.export_questions(list(db.questions), "csv"), model)
        assert again == db

    def test_bad_step_tag_aborts_whole_import(self, model):
        rows = [make_question(f"q-{i}", ra.Requirement.TRANSPARENCY, {"goals"}) for i in range(9)]
        docs = [q.to_doc() for q in rows]
        docs.insert(4, {
            "id": "q-bad", "text": "Tagged to nowhere?", "requirement": "Transparency",
            "step_tags": ["not_a_step"], "source": "synthetic", "mandatory": False,
        })
        with pytest.raises(ValidationError) as err:
            ra.import_questions(json.dumps(docs), model)
        assert "row 5" in "\n".join(err.value.details)
        assert "not_a_step" in "\n".join(err.value.details)

    def test_unknown_requirement_reported_with_row(self, model):
        text = "id,text,requirement,step_tags,source,mandatory\nq1,What?,Fairness,goals,s,false\n"
        with pytest.raises(ValidationError) as err:
            ra.import_questions(text, model)
        assert any("row 2" in d and "requirement" in d for d in err.value.details)

    def test_duplicate_id_rejected(self, model):
        q = make_question("dup", ra.Requirement.TRANSPARENCY, {"goals"})
        with pytest.raises(ValidationError) as err:
            ra.import_questions(json.dumps([q.to_doc(), q.to_doc()]), model)
        assert any("duplicate" in d for d in err.value.details)

    def test_empty_step_tags_rejected(self, model):
        doc = [{"id": "q1", "text": "t?", "requirement": "Transparency",
                "step_tags": [], "source": "", "mandatory": False}]
        with pytest.raises(ValidationError):
            ra.import_questions(json.dumps(doc), model)

    def test_digest_is_content_based(self, model):
        db1 = ra.import_questions(sample_question_csv(), model)
        db2 = ra.import_questions(sample_question_csv(), model)
        assert db1.digest == db2.digest


class TestFilter:
    def test_ux_scope_returns_sample_questions(self, model):
        db = ra.import_questions(sample_question_csv(), model)
        matched = ra.filter_questions(db, {"user_experience"})
        texts = [q.text for q in matched]
        assert "Did you explain the decision(s) of the AI system to the users?" in texts
        assert ("Do you continuously survey the users to assess whether they understand "
                "the decision(s) of the AI system?") in texts
        assert ("Did you provide appropriate training material and disclaimers to users "
                "on how to adequately use the AI system?") in texts

    def test_disjoint_scope_empty(self, model):
        db = ra.import_questions(sample_question_csv(), model)
        assert ra.filter_questions(db, {"feature_engineering"}) == []

    def test_empty_scope_rejected(self, model):
        db = ra.import_questions(sample_question_csv(), model)
        with pytest.raises(ValidationError):
            ra.filter_questions(db, set())

    def test_requirement_filter(self, model):
        db = ra.import_questions(sample_question_csv(), model)
        matched = ra.filter_questions(
            db, {"user_experience"}, [ra.Requirement.TRANSPARENCY]
        )
        assert all(q.requirement == ra.Requirement.TRANSPARENCY for q in matched)
        assert len(matched) == 3

    def test_ordering_requirement_then_id(self, model):
        db = ra.import_questions(sample_question_csv(), model)
        scope = set(model.step_ids())
        matched = ra.filter_questions(db, scope)
        keys = [q.sort_key() for q in matched]
        assert keys == sorted(keys)

    def _random_db(self, rng: random.Random, model: lc.LifecycleModel) -> ra.QuestionDB:
        steps = model.step_ids()
        questions = [
            make_question(
                f"q-{i:03d}",
                rng.choice(REQUIREMENTS),
                set(rng.sample(steps, rng.randint(1, 4))),
            )
            for i in range(50)
        ]
        return db_of(questions)

    def test_random_scopes_match_brute_force(self, model):
        rng = random.Random(7)
        db = self._random_db(rng, model)
        steps = model.step_ids()
        for _ in range(30):
            scope = set(rng.sample(steps, rng.randint(1, 10)))
            expected = sorted(
                (q for q in db.questions if any(t in scope for t in q.step_tags)),
                key=ra.RiskQuestion.sort_key,
            )
            assert ra.filter_questions(db, scope) == expected

    @settings(max_examples=60, deadline=None)
    @given(
        scope_a=st.sets(st.sampled_from(lc.instantiate_template().step_ids()), min_size=1),
        scope_b=st.sets(st.sampled_from(lc.instantiate_template().step_ids()), min_size=1),
        seed=st.integers(min_value=0, max_value=2**16),
    )
    def test_union_distributes(self, scope_a, scope_b, seed):
        model = lc.instantiate_template()
        db = self._random_db(random.Random(seed), model)
        from_union = {q.id for q in ra.filter_questions(db, scope_a | scope_b)}
        from_parts = {q.id for q in ra.filter_questions(db, scope_a)} | {
            q.id for q in ra.filter_questions(db, scope_b)
        }
        assert from_union == from_parts

    def test_result_is_subset_of_db(self, model):
        rng = random.Random(11)
        db = self._random_db(rng, model)
        matched = ra.filter_questions(db, {"goals", "curation"})
        assert {q.id for q in matched} <= {q.id for q in db.questions}

    def test_narrowing_requirements_never_enlarges(self, model):
        rng = random.Random(13)
        db = self._random_db(rng, model)
        scope = {"goals", "user_experience", "sandboxing"}
        broad = ra.filter_questions(db, scope)
        for requirement in REQUIREMENTS:
            narrow = ra.filter_questions(db, scope, [requirement])
            assert {q.id for q in narrow} <= {q.id for q in broad}


class TestResponses:
    def test_no_requires_justification(self):
        with pytest.raises(ValidationError):
            response("q1", ra.Answer.NO, justification=" ").validate()

    def test_partial_requires_justification(self):
        with pytest.raises(ValidationError):
            response("q1", ra.Answer.PARTIAL, justification="").validate()

    def test_not_applicable_without_justification_accepted(self):
        response("q1", ra.Answer.NOT_APPLICABLE, justification="").validate()

    def test_flagging_rule(self):
        assert response("q", ra.Answer.NO).flagged
        assert response("q", ra.Answer.PARTIAL).flagged
        assert response("q", ra.Answer.UNKNOWN).flagged
        assert not response("q", ra.Answer.YES).flagged
        assert not response("q", ra.Answer.NOT_APPLICABLE).flagged


class TestDeriveConcerns:
    def _retained(self) -> list[ra.RiskQuestion]:
        return [
            make_question("m-1", ra.Requirement.TECHNICAL_ROBUSTNESS_SAFETY, {"goals"},
                          mandatory=True),
            make_question("o-1", ra.Requirement.TECHNICAL_ROBUSTNESS_SAFETY, {"goals"}),
            make_question("t-1", ra.Requirement.TRANSPARENCY, {"goals"}),
            make_question("p-1", ra.Requirement.PRIVACY_DATA_GOVERNANCE, {"goals"}),
        ]

    def test_all_yes_no_concerns(self):
        retained = self._retained()
        answers = {q.id: response(q.id, ra.Answer.YES) for q in retained}
        assert ra.derive_concerns(retained, answers) == []

    def test_unanswered_question_blocks(self):
        retained = self._retained()
        answers = {"m-1": response("m-1", ra.Answer.YES)}
        with pytest.raises(ValidationError):
            ra.derive_concerns(retained, answers)

    def test_deferred_question_unblocks(self):
        retained = self._retained()
        answers = {q.id: response(q.id, ra.Answer.YES) for q in retained if q.id != "t-1"}
        assert ra.derive_concerns(retained, answers, deferred={"t-1"}) == []

    def test_severity_ladder(self):
        retained = self._retained()
        answers = {
            "m-1": response("m-1", ra.Answer.NO),        # mandatory No -> Major
            "o-1": response("o-1", ra.Answer.YES),
            "t-1": response("t-1", ra.Answer.NO),        # non-mandatory No -> Info
            "p-1": response("p-1", ra.Answer.PARTIAL),   # only Partial -> Advisory
        }
        concerns = ra.derive_concerns(retained, answers)
        by_requirement = {c.requirement: c for c in concerns}
        assert by_requirement[ra.Requirement.TECHNICAL_ROBUSTNESS_SAFETY].severity == ra.Severity.MAJOR
        assert by_requirement[ra.Requirement.PRIVACY_DATA_GOVERNANCE].severity == ra.Severity.ADVISORY
        assert by_requirement[ra.Requirement.TRANSPARENCY].severity == ra.Severity.INFO

    def test_ordering_and_determinism(self):
        retained = self._retained()
        answers = {
            "m-1": response("m-1", ra.Answer.NO),
            "o-1": response("o-1", ra.Answer.UNKNOWN, justification=""),
            "t-1": response("t-1", ra.Answer.NO),
            "p-1": response("p-1", ra.Answer.PARTIAL),
        }
        first = ra.derive_concerns(retained, answers)
        second = ra.derive_concerns(retained, answers)
        assert first == second
        orders = [ra.requirement_order(c.requirement) for c in first]
        assert orders == sorted(orders)

    def test_triggering_ids_belong_to_requirement(self):
        retained = self._retained()
        answers = {
            "m-1": response("m-1", ra.Answer.NO),
            "o-1": response("o-1", ra.Answer.PARTIAL),
            "t-1": response("t-1", ra.Answer.NO),
            "p-1": response("p-1", ra.Answer.YES),
        }
        by_id = {q.id: q for q in retained}
        for concern in ra.derive_concerns(retained, answers):
            for qid in concern.triggering_responses:
                assert by_id[qid].requirement == concern.requirement

    def test_severity_override_applies(self):
        retained = self._retained()
        answers = {
            "m-1": response("m-1", ra.Answer.NO),
            "o-1": response("o-1", ra.Answer.YES),
            "t-1": response("t-1", ra.Answer.YES),
            "p-1": response("p-1", ra.Answer.YES),
        }
        concerns = ra.derive_concerns(
            retained, answers,
            severity_overrides={
                ra.Requirement.TECHNICAL_ROBUSTNESS_SAFETY: (ra.Severity.INFO, "accepted risk")
            },
        )
        assert concerns[0].severity == ra.Severity.INFO
        assert concerns[0].severity_override_rationale == "accepted risk"

    def test_randomized_sets_match_flag_scan_oracle(self):
        rng = random.Random(21)
        for _ in range(50):
            retained = [
                make_question(
                    f"q-{i}", rng.choice(REQUIREMENTS), {"goals"},
                    mandatory=rng.random() < 0.3,
                )
                for i in range(rng.randint(1, 20))
            ]
            answers = {
                q.id: response(q.id, rng.choice(list(ra.Answer)))
                for q in retained
            }
            concerns = ra.derive_concerns(retained, answers)
            # brute-force per-requirement flag scan
            expected: dict[ra.Requirement, list[str]] = {}
            for q in retained:
                if answers[q.id].answer in (ra.Answer.NO, ra.Answer.PARTIAL, ra.Answer.UNKNOWN):
                    expected.setdefault(q.requirement, []).append(q.id)
            assert {c.requirement for c in concerns} == set(expected)
            for concern in concerns:
                assert sorted(expected[concern.requirement]) == list(
                    concern.triggering_responses
                )


class TestMitigations:
    def test_waived_requires_rationale(self):
        rec = ra.MitigationRecommendation(id="r1", text="do this")
        with pytest.raises(ValidationError):
            rec.with_status(ra.MitigationStatus.WAIVED)
        waived = rec.with_status(ra.MitigationStatus.WAIVED, "superseded by redesign")
        assert waived.status == ra.MitigationStatus.WAIVED
