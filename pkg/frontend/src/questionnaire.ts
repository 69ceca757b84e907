/**
 * Questionnaire flow: present exactly the scope-filtered question list
 * grouped by requirement, submit answers through the revision protocol and
 * track progress as answered / retained.
 */

import { AuditDoc, QuestionDoc, WorkbenchClient } from "./api.js";
import { SubmitOutcome, ViewStore, submitWithRevision } from "./state.js";

/** Fixed requirement ordering, matching the server's. */
export const REQUIREMENT_ORDER = [
  "HumanAgencyOversight",
  "TechnicalRobustnessSafety",
  "PrivacyDataGovernance",
  "Transparency",
  "DiversityNonDiscriminationFairness",
  "SocietalEnvironmentalWellbeing",
  "Accountability",
] as const;

export interface QuestionGroup {
  requirement: string;
  questions: QuestionDoc[];
}

export function groupByRequirement(questions: QuestionDoc[]): QuestionGroup[] {
  const groups: QuestionGroup[] = [];
  for (const requirement of REQUIREMENT_ORDER) {
    const matched = questions.filter((q) => q.requirement === requirement);
    if (matched.length) groups.push({ requirement, questions: matched });
  }
  return groups;
}

export interface Progress {
  answered: number;
  deferred: number;
  retained: number;
  percent: number;
}

function openIteration(audit: AuditDoc): Record<string, any> | null {
  const open = (audit.iterations as any[]).filter((it) => it.phase !== "Reported");
  return open.length ? open[open.length - 1] : null;
}

export function computeProgress(audit: AuditDoc): Progress {
  const iteration = openIteration(audit);
  const retainedIds: string[] = iteration?.scope?.retained_questions ?? [];
  const answeredIds = new Set<string>(
    (iteration?.responses ?? []).map((r: any) => r.question_id),
  );
  const deferredIds = new Set<string>(
    (iteration?.deferrals ?? []).map((d: any) => d.question_id),
  );
  const answered = retainedIds.filter((id) => answeredIds.has(id)).length;
  const deferred = retainedIds.filter(
    (id) => !answeredIds.has(id) && deferredIds.has(id),
  ).length;
  const retained = retainedIds.length;
  const percent = retained === 0 ? 100 : Math.round((100 * answered) / retained);
  return { answered, deferred, retained, percent };
}

export class QuestionnaireFlow {
  private questions: QuestionDoc[] = [];
  private audit: AuditDoc | null = null;

  constructor(
    private readonly client: WorkbenchClient,
    private readonly store: ViewStore,
    private readonly auditId: string,
  ) {}

  async load(): Promise<void> {
    this.audit = await this.client.getAudit(this.auditId);
    this.store.noteRevision(this.auditId, this.audit.revision);
    this.questions = await this.client.questions(this.auditId);
  }

  groups(): QuestionGroup[] {
    return groupByRequirement(this.questions);
  }

  progress(): Progress {
    if (!this.audit) return { answered: 0, deferred: 0, retained: 0, percent: 0 };
    return computeProgress(this.audit);
  }

  /** Next question without a current answer or deferral, in group order. */
  nextUnanswered(): QuestionDoc | null {
    if (!this.audit) return null;
    const iteration = openIteration(this.audit);
    const answered = new Set<string>(
      (iteration?.responses ?? []).map((r: any) => r.question_id),
    );
    const deferred = new Set<string>(
      (iteration?.deferrals ?? []).map((d: any) => d.question_id),
    );
    for (const group of this.groups()) {
      for (const question of group.questions) {
        if (!answered.has(question.id) && !deferred.has(question.id)) return question;
      }
    }
    return null;
  }

  async answer(
    questionId: string,
    answer: string,
    justification = "",
    actor = "workbench",
  ): Promise<SubmitOutcome<AuditDoc>> {
    const outcome = await submitWithRevision(
      this.store,
      this.auditId,
      (expected) =>
        this.client.respond(this.auditId, expected, {
          question_id: questionId,
          answer,
          justification,
          answered_by: actor,
        }),
      (audit) => audit.revision,
    );
    if (outcome.kind === "ok") this.audit = outcome.value;
    return outcome;
  }

  async defer(
    questionId: string,
    rationale: string,
  ): Promise<SubmitOutcome<AuditDoc>> {
    const outcome = await submitWithRevision(
      this.store,
      this.auditId,
      (expected) => this.client.defer(this.auditId, expected, questionId, rationale),
      (audit) => audit.revision,
    );
    if (outcome.kind === "ok") this.audit = outcome.value;
    return outcome;
  }

  /** The Fieldwork -> Reporting gate precondition, shown on the advance button. */
  readyToAdvance(): boolean {
    const progress = this.progress();
    return progress.answered + progress.deferred === progress.retained;
  }
}
