import { describe, expect, it } from "vitest";

import { ConflictError } from "../src/api.js";
import { ViewStore, submitWithRevision } from "../src/state.js";

/** In-memory stand-in for the server's revision-checked entity. */
class FakeEntity {
  revision = 1;
  value = "initial";
  applied: string[] = [];

  async write(expected: number, next: string): Promise<{ revision: number }> {
    if (expected !== this.revision) {
      throw new ConflictError(409, "stale revision", expected, this.revision);
    }
    this.revision += 1;
    this.value = next;
    this.applied.push(next);
    return { revision: this.revision };
  }
}

describe("revision-guarded submission", () => {
  it("refuses to send drafts without a known revision", async () => {
    const store = new ViewStore();
    const entity = new FakeEntity();
    const outcome = await submitWithRevision(store, "audit:x", (expected) =>
      entity.write(expected, "draft"),
    );
    expect(outcome.kind).toBe("rejected");
    expect(entity.applied).toEqual([]); // nothing was sent
  });

  it("applies a clean write and tracks the new revision", async () => {
    const store = new ViewStore();
    const entity = new FakeEntity();
    store.noteRevision("audit:x", 1);
    const outcome = await submitWithRevision(
      store,
      "audit:x",
      (expected) => entity.write(expected, "v2"),
      (result) => result.revision,
    );
    expect(outcome.kind).toBe("ok");
    expect(store.expectedRevision("audit:x")).toBe(2);
    expect(entity.value).toBe("v2");
  });

  it("a stale writer gets a visible conflict prompt, never a silent overwrite", async () => {
    const storeA = new ViewStore();
    const storeB = new ViewStore();
    const entity = new FakeEntity();
    storeA.noteRevision("audit:x", 1);
    storeB.noteRevision("audit:x", 1);

    const first = await submitWithRevision(
      storeA,
      "audit:x",
      (expected) => entity.write(expected, "from A"),
      (result) => result.revision,
    );
    expect(first.kind).toBe("ok");

    const second = await submitWithRevision(
      storeB,
      "audit:x",
      (expected) => entity.write(expected, "from B"),
      (result) => result.revision,
    );
    expect(second.kind).toBe("conflict");
    expect(entity.value).toBe("from A"); // B's draft was not applied
    const prompt = storeB.get().conflictPrompt;
    expect(prompt).not.toBeNull();
    expect(prompt!.expected).toBe(1);
    expect(prompt!.actual).toBe(2);
  });

  it("simulated concurrent edits always end in success or explicit conflict", async () => {
    let seed = 987654321;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let round = 0; round < 50; round++) {
      const entity = new FakeEntity();
      const clients = [0, 1, 2].map(() => {
        const store = new ViewStore();
        store.noteRevision("e", entity.revision);
        return store;
      });
      let okCount = 0;
      let conflictCount = 0;
      for (let i = 0; i < 20; i++) {
        const store = clients[Math.floor(rand() * clients.length)];
        if (rand() < 0.3) store.noteRevision("e", entity.revision); // refresh
        const outcome = await submitWithRevision(
          store,
          "e",
          (expected) => entity.write(expected, `w${round}-${i}`),
          (result) => result.revision,
        );
        expect(["ok", "conflict"]).toContain(outcome.kind);
        if (outcome.kind === "ok") okCount += 1;
        else {
          conflictCount += 1;
          expect(store.get().conflictPrompt).not.toBeNull();
          store.clearConflict();
        }
      }
      // no lost updates: every acknowledged write landed exactly once
      expect(entity.applied.length).toBe(okCount);
      expect(entity.revision).toBe(1 + okCount);
      expect(okCount + conflictCount).toBe(20);
    }
  });
});
