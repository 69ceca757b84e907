/**
 * View state with optimistic-concurrency bookkeeping.
 *
 * The store tracks the last revision seen per entity. Drafts are never sent
 * without that expected revision; when the server answers with a conflict,
 * the outcome surfaces as an explicit prompt for the user to reload, never
 * as a silent overwrite or retry.
 */

import { ConflictError } from "./api.js";

export interface ConflictPrompt {
  entityId: string;
  expected: number;
  actual: number;
  message: string;
}

export interface ResponseDraft {
  questionId: string;
  answer: string;
  justification: string;
}

export interface ViewState {
  activeAuditId: string | null;
  selectedStep: string | null;
  drafts: Record<string, ResponseDraft>;
  revisions: Record<string, number>;
  conflictPrompt: ConflictPrompt | null;
  offline: boolean;
}

const INITIAL: ViewState = {
  activeAuditId: null,
  selectedStep: null,
  drafts: {},
  revisions: {},
  conflictPrompt: null,
  offline: false,
};

type Listener = (state: ViewState) => void;

export class ViewStore {
  private state: ViewState = { ...INITIAL };
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  set(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  noteRevision(entityId: string, revision: number): void {
    this.set({ revisions: { ...this.state.revisions, [entityId]: revision } });
  }

  expectedRevision(entityId: string): number | null {
    return this.state.revisions[entityId] ?? null;
  }

  raiseConflict(prompt: ConflictPrompt): void {
    this.set({ conflictPrompt: prompt });
  }

  clearConflict(): void {
    this.set({ conflictPrompt: null });
  }
}

export type SubmitOutcome<T> =
  | { kind: "ok"; value: T }
  | { kind: "conflict"; expected: number; actual: number }
  | { kind: "rejected"; message: string };

/**
 * Run one revision-guarded mutation. Refuses to send anything when no
 * revision is known for the entity; converts a server-side conflict into a
 * visible prompt and reports it, leaving the draft intact for the caller.
 */
export async function submitWithRevision<T>(
  store: ViewStore,
  entityId: string,
  send: (expectedRevision: number) => Promise<T>,
  noteRevision: (value: T) => number | null = () => null,
): Promise<SubmitOutcome<T>> {
  const expected = store.expectedRevision(entityId);
  if (expected === null) {
    return {
      kind: "rejected",
      message: `no known revision for ${entityId}; load it before editing`,
    };
  }
  try {
    const value = await send(expected);
    const next = noteRevision(value);
    if (next !== null) store.noteRevision(entityId, next);
    return { kind: "ok", value };
  } catch (error) {
    if (error instanceof ConflictError) {
      store.raiseConflict({
        entityId,
        expected: error.expected,
        actual: error.actual,
        message: error.message,
      });
      return { kind: "conflict", expected: error.expected, actual: error.actual };
    }
    return { kind: "rejected", message: error instanceof Error ? error.message : String(error) };
  }
}
