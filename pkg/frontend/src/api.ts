/**
 * Thin typed client over the workbench HTTP API.
 *
 * Every mutating call names the audit revision the caller last saw; a 409
 * with expected/actual becomes a ConflictError so the UI can raise its
 * conflict prompt, and a 409 with unmet gate conditions becomes a GateError.
 */

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly detail: unknown = null,
  ) {
    super(message);
  }
}

export class ConflictError extends ApiError {
  constructor(
    status: number,
    message: string,
    public readonly expected: number,
    public readonly actual: number,
  ) {
    super(status, message);
  }
}

export class GateError extends ApiError {
  constructor(status: number, message: string, public readonly unmet: string[]) {
    super(status, message);
  }
}

export interface AuditSummary {
  id: string;
  title: string;
  kind: string;
  target_system: string;
  revision: number;
  iterations: number;
  open_phase: string | null;
}

export interface QuestionDoc {
  id: string;
  text: string;
  requirement: string;
  step_tags: string[];
  source: string;
  mandatory: boolean;
}

export interface CoverageDoc {
  overall: string | null;
  per_phase: Record<
    string,
    { blue: number; yellow: number; white: number; pending: number; fraction: string | null }
  >;
}

export type AuditDoc = Record<string, any>;

export class WorkbenchClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string | null = null,
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.token) headers.authorization = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.ok) {
      const contentType = response.headers.get("content-type") ?? "";
      if (contentType.includes("application/json")) return (await response.json()) as T;
      return (await response.text()) as unknown as T;
    }
    let detail: any = null;
    try {
      detail = (await response.json()).detail;
    } catch {
      /* non-JSON error body */
    }
    const message = detail?.error ?? `${method} ${path} failed with ${response.status}`;
    if (response.status === 409 && detail && typeof detail.expected === "number") {
      throw new ConflictError(response.status, message, detail.expected, detail.actual);
    }
    if (response.status === 409 && detail && Array.isArray(detail.unmet)) {
      throw new GateError(response.status, message, detail.unmet);
    }
    throw new ApiError(response.status, message, detail);
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  listAudits(): Promise<AuditSummary[]> {
    return this.request("GET", "/audits");
  }

  createAudit(params: {
    title: string;
    kind: string;
    target_system: string;
    audit_id?: string;
  }): Promise<AuditDoc> {
    return this.request("POST", "/audits", params);
  }

  getAudit(auditId: string): Promise<AuditDoc> {
    return this.request("GET", `/audits/${auditId}`);
  }

  coverage(auditId: string): Promise<CoverageDoc> {
    return this.request("GET", `/audits/${auditId}/coverage`);
  }

  assessStep(
    auditId: string,
    expectedRevision: number,
    assessment: {
      step_id: string;
      status: string;
      rationale: string;
      assessed_by: string;
      expected_revision?: number;
    },
  ): Promise<AuditDoc> {
    return this.request("POST", `/audits/${auditId}/assessments`, {
      expected_revision: expectedRevision,
      assessment,
    });
  }

  setOwner(auditId: string, expectedRevision: number, stepId: string, owner: string | null) {
    return this.request<AuditDoc>("PUT", `/audits/${auditId}/steps/${stepId}/owner`, {
      expected_revision: expectedRevision,
      owner,
    });
  }

  declareSource(
    auditId: string,
    expectedRevision: number,
    declaration: { step_id: string; description: string; access_basis: string },
  ) {
    return this.request<AuditDoc>("POST", `/audits/${auditId}/evidence-sources`, {
      expected_revision: expectedRevision,
      declaration,
    });
  }

  auditability(auditId: string): Promise<{ verdict: string; blockers: string[] }> {
    return this.request("GET", `/audits/${auditId}/auditability`);
  }

  advance(auditId: string, expectedRevision: number, actor: string): Promise<AuditDoc> {
    return this.request("POST", `/audits/${auditId}/advance`, {
      expected_revision: expectedRevision,
      actor,
    });
  }

  attachQuestionDb(auditId: string, expectedRevision: number, document: string) {
    return this.request<{ digest: string; count: number }>(
      "POST",
      `/audits/${auditId}/question-db`,
      { expected_revision: expectedRevision, document },
    );
  }

  questions(auditId: string): Promise<QuestionDoc[]> {
    return this.request("GET", `/audits/${auditId}/questions`);
  }

  respond(
    auditId: string,
    expectedRevision: number,
    response: {
      question_id: string;
      answer: string;
      justification: string;
      answered_by: string;
    },
  ): Promise<AuditDoc> {
    return this.request("POST", `/audits/${auditId}/responses`, {
      expected_revision: expectedRevision,
      response,
    });
  }

  defer(auditId: string, expectedRevision: number, questionId: string, rationale: string) {
    return this.request<AuditDoc>("POST", `/audits/${auditId}/deferrals`, {
      expected_revision: expectedRevision,
      question_id: questionId,
      rationale,
      actor: "workbench",
    });
  }

  deriveConcerns(auditId: string, expectedRevision: number) {
    return this.request<{ revision: number; concerns: any[] }>(
      "POST",
      `/audits/${auditId}/concerns`,
      { expected_revision: expectedRevision },
    );
  }

  compileReport(auditId: string, expectedRevision: number): Promise<Record<string, any>> {
    return this.request("POST", `/audits/${auditId}/report`, {
      expected_revision: expectedRevision,
    });
  }

  async reportCanonical(auditId: string): Promise<Record<string, any>> {
    const text = await this.request<string>(
      "GET",
      `/audits/${auditId}/report?format=canonical`,
    );
    return typeof text === "string" ? JSON.parse(text) : text;
  }

  reportMarkdown(auditId: string): Promise<string> {
    return this.request("GET", `/audits/${auditId}/report?format=markdown`);
  }
}
