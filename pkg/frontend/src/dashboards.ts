/**
 * Monitoring timeline and report preview models.
 *
 * Both are projections of API documents only: batch verdicts and values come
 * from recorded monitor runs, the report preview shows the markdown the API
 * rendered and the digest the API computed. Nothing is recomputed here.
 */

import { AuditDoc, WorkbenchClient } from "./api.js";

export interface TimelineEntry {
  specId: string;
  batchIndex: number;
  verdict: "Pass" | "Fail" | "Indeterminate";
  value: number | null;
  windowCount: number;
  expanded: boolean; // failing batches open with full detail
  detail: Record<string, any> | null;
}

export interface MonitorTimeline {
  specId: string;
  batchCount: number;
  passCount: number;
  failCount: number;
  indeterminateCount: number;
  entries: TimelineEntry[];
}

export function buildTimelines(audit: AuditDoc): MonitorTimeline[] {
  const timelines: MonitorTimeline[] = [];
  for (const iteration of audit.iterations as any[]) {
    for (const run of iteration.monitor_runs ?? []) {
      timelines.push({
        specId: run.spec_id,
        batchCount: run.batch_count,
        passCount: run.pass_count,
        failCount: run.fail_count,
        indeterminateCount: run.indeterminate_count,
        entries: (run.results as any[]).map((result) => ({
          specId: run.spec_id,
          batchIndex: result.batch_index,
          verdict: result.verdict,
          value: result.value,
          windowCount: result.window.count,
          expanded: result.verdict === "Fail",
          detail: result.verdict === "Fail" ? result : null,
        })),
      });
    }
  }
  return timelines;
}

export interface ReportPreview {
  markdown: string;
  /** Digest label shown in the UI; always the API-provided value. */
  digest: string;
  generatedAt: string;
}

export async function loadReportPreview(
  client: WorkbenchClient,
  auditId: string,
): Promise<ReportPreview> {
  const canonical = await client.reportCanonical(auditId);
  const markdown = await client.reportMarkdown(auditId);
  return {
    markdown,
    digest: canonical.content_digest,
    generatedAt: canonical.metadata.generated_at,
  };
}
