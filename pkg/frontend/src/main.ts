/**
 * Workbench shell: audit picker, lifecycle map, questionnaire, monitoring
 * timeline and report preview, all backed by the HTTP API.
 */

import { ApiError, WorkbenchClient } from "./api.js";
import { StepTile } from "./colors.js";
import { buildTimelines, loadReportPreview } from "./dashboards.js";
import { renderLifecycleMap, renderOfflineBanner } from "./lifecycleMap.js";
import { QuestionnaireFlow } from "./questionnaire.js";
import { ViewStore, submitWithRevision } from "./state.js";

const client = new WorkbenchClient("", null); // same-origin deployment
const store = new ViewStore();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function refreshAuditList(): Promise<void> {
  const list = el<HTMLUListElement>("audit-list");
  const audits = await client.listAudits();
  list.innerHTML = "";
  for (const audit of audits) {
    const item = document.createElement("li");
    const link = document.createElement("button");
    link.textContent = `${audit.title} [${audit.open_phase ?? "reported"}]`;
    link.addEventListener("click", () => selectAudit(audit.id));
    item.appendChild(link);
    list.appendChild(item);
  }
}

async function selectAudit(auditId: string): Promise<void> {
  store.set({ activeAuditId: auditId });
  await renderAll(auditId);
}

function renderConflictPrompt(): void {
  const host = el<HTMLDivElement>("conflict-prompt");
  const prompt = store.get().conflictPrompt;
  if (!prompt) {
    host.hidden = true;
    return;
  }
  host.hidden = false;
  host.innerHTML = "";
  const text = document.createElement("p");
  text.textContent =
    `Your view of ${prompt.entityId} is stale (you saw revision ${prompt.expected}, ` +
    `the server is at ${prompt.actual}). Reload to continue; your draft stays here.`;
  const reload = document.createElement("button");
  reload.textContent = "Reload audit";
  reload.addEventListener("click", async () => {
    store.clearConflict();
    const active = store.get().activeAuditId;
    if (active) await renderAll(active);
  });
  host.appendChild(text);
  host.appendChild(reload);
}

store.subscribe(() => renderConflictPrompt());

async function renderAll(auditId: string): Promise<void> {
  const mapRoot = el<HTMLDivElement>("lifecycle-map");
  try {
    const audit = await client.getAudit(auditId);
    store.noteRevision(auditId, audit.revision);
    store.set({ offline: false });
    renderOfflineBanner(document.body, false);

    const coverage = await client.coverage(auditId);
    renderLifecycleMap(mapRoot, audit, coverage, {
      onSelectStep: (tile) => openAssessmentEditor(auditId, tile),
    });

    await renderQuestionnaire(auditId);
    renderMonitoring(audit);
    await renderReportPreview(auditId);
  } catch (error) {
    if (error instanceof ApiError) throw error;
    // network failure: keep the cached view, flag read-only
    store.set({ offline: true });
    renderOfflineBanner(document.body, true);
  }
}

function openAssessmentEditor(auditId: string, tile: StepTile): void {
  store.set({ selectedStep: tile.stepId });
  const editor = el<HTMLFormElement>("assessment-editor");
  editor.hidden = false;
  el<HTMLElement>("assessment-step").textContent = `${tile.title} (${tile.status})`;
  const statusInput = el<HTMLSelectElement>("assessment-status");
  statusInput.value = tile.status;
  const rationaleInput = el<HTMLTextAreaElement>("assessment-rationale");
  rationaleInput.value = tile.rationale;
  editor.onsubmit = async (event) => {
    event.preventDefault();
    const outcome = await submitWithRevision(
      store,
      auditId,
      (expected) =>
        client.assessStep(auditId, expected, {
          step_id: tile.stepId,
          status: statusInput.value,
          rationale: rationaleInput.value,
          assessed_by: "workbench-user",
        }),
      (audit) => audit.revision,
    );
    if (outcome.kind === "ok") {
      editor.hidden = true;
      await renderAll(auditId);
    } else if (outcome.kind === "rejected") {
      el<HTMLElement>("assessment-error").textContent = outcome.message;
    }
  };
}

async function renderQuestionnaire(auditId: string): Promise<void> {
  const host = el<HTMLDivElement>("questionnaire");
  const flow = new QuestionnaireFlow(client, store, auditId);
  await flow.load();
  host.innerHTML = "";

  const progress = flow.progress();
  const bar = document.createElement("p");
  bar.className = "progress";
  bar.textContent =
    progress.retained === 0
      ? "No questions retained for this scope."
      : `Progress: ${progress.answered}/${progress.retained} (${progress.percent}%)`;
  host.appendChild(bar);

  for (const group of flow.groups()) {
    const section = document.createElement("section");
    const heading = document.createElement("h4");
    heading.textContent = group.requirement;
    section.appendChild(heading);
    for (const question of group.questions) {
      const row = document.createElement("div");
      row.className = "question";
      row.textContent = question.text;
      section.appendChild(row);
    }
    host.appendChild(section);
  }
}

function renderMonitoring(audit: Record<string, any>): void {
  const host = el<HTMLDivElement>("monitoring");
  host.innerHTML = "";
  const timelines = buildTimelines(audit);
  if (!timelines.length) {
    host.textContent = "No monitor runs recorded.";
    return;
  }
  for (const timeline of timelines) {
    const section = document.createElement("section");
    const heading = document.createElement("h4");
    heading.textContent =
      `${timeline.specId}: ${timeline.passCount} pass / ` +
      `${timeline.failCount} fail / ${timeline.indeterminateCount} indeterminate`;
    section.appendChild(heading);
    const strip = document.createElement("div");
    strip.className = "timeline";
    for (const entry of timeline.entries) {
      const cell = document.createElement("span");
      cell.className = `batch batch-${entry.verdict.toLowerCase()}`;
      cell.textContent = String(entry.batchIndex);
      if (entry.expanded && entry.detail) {
        cell.title = JSON.stringify(entry.detail.per_stratum);
      }
      strip.appendChild(cell);
    }
    section.appendChild(strip);
    host.appendChild(section);
  }
}

async function renderReportPreview(auditId: string): Promise<void> {
  const host = el<HTMLDivElement>("report-preview");
  host.innerHTML = "";
  try {
    const preview = await loadReportPreview(client, auditId);
    const digest = document.createElement("p");
    digest.className = "digest-label";
    digest.textContent = `Report digest: ${preview.digest}`;
    const body = document.createElement("pre");
    body.textContent = preview.markdown;
    host.appendChild(digest);
    host.appendChild(body);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      host.textContent = "No report compiled yet.";
      return;
    }
    throw error;
  }
}

refreshAuditList().catch(() => {
  store.set({ offline: true });
  renderOfflineBanner(document.body, true);
});
