/**
 * Fixed status -> color mapping (part of the wire contract) plus pattern
 * overlays, since color alone is not accessible.
 *
 * The tile builders here are pure functions of the audit document returned
 * by the API; the workbench never invents a color or recomputes a status.
 */

export type StepStatus = "Pending" | "InScope" | "NotRelevant" | "NotAuditable";
export type TileColor = "blue" | "yellow" | "white" | "grey";

export const STATUS_COLORS: Record<StepStatus, TileColor> = {
  InScope: "blue",
  NotRelevant: "yellow",
  NotAuditable: "white",
  Pending: "grey",
};

/** Hatching overlays so tiles stay distinguishable without color vision. */
export const STATUS_PATTERNS: Record<StepStatus, string> = {
  InScope: "solid",
  NotRelevant: "diagonal-hatch",
  NotAuditable: "dotted-outline",
  Pending: "plain",
};

export function colorFor(status: StepStatus): TileColor {
  return STATUS_COLORS[status];
}

export function patternFor(status: StepStatus): string {
  return STATUS_PATTERNS[status];
}

export interface StepTile {
  stepId: string;
  title: string;
  status: StepStatus;
  color: TileColor;
  pattern: string;
  owner: string | null;
  rationale: string;
}

export interface PhaseTiles {
  phaseId: string;
  title: string;
  tiles: StepTile[];
}

interface ModelDoc {
  phases: {
    id: string;
    title: string;
    steps: { id: string; title: string; owner: string | null }[];
  }[];
  statuses: Record<string, { status: string; color: string }>;
  history?: {
    step_id: string;
    rationale: string;
  }[];
}

/** Build the phase/step tile grid from the audit's lifecycle model document. */
export function buildTiles(model: ModelDoc): PhaseTiles[] {
  const rationales = new Map<string, string>();
  for (const entry of model.history ?? []) {
    rationales.set(entry.step_id, entry.rationale); // last write wins
  }
  return model.phases.map((phase) => ({
    phaseId: phase.id,
    title: phase.title,
    tiles: phase.steps.map((step) => {
      const status = (model.statuses[step.id]?.status ?? "Pending") as StepStatus;
      return {
        stepId: step.id,
        title: step.title,
        status,
        color: colorFor(status),
        pattern: patternFor(status),
        owner: step.owner,
        rationale: rationales.get(step.id) ?? "",
      };
    }),
  }));
}

/** "12/26"-style coverage strings come from the API verbatim; undefined
 * coverage renders as an em dash, never as 0. */
export function coverageLabel(fraction: string | null): string {
  return fraction === null ? "—" : fraction;
}
