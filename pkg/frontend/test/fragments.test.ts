// Rendering branches that the live-server flow does not reach.

import { describe, expect, it } from "vitest";

import { renderLibrary } from "../src/panels/libraryPanel";
import { renderCards } from "../src/panels/cards";
import { initialState } from "../src/state";
import type { SessionDiff } from "../src/types";

describe("library fragments", () => {
  it("empty library shows an onboarding hint", () => {
    const html = renderLibrary({ sessions: [], diff: null, error: null }, initialState());
    expect(html).toContain("Nothing archived yet");
  });

  it("identical sessions render as no changes", () => {
    const diff: SessionDiff = {
      a: "s-1",
      b: "s-2",
      plan_changes: [],
      sketches: { a_count: 1, b_count: 1, a_rules: [], b_rules: [] },
      alignment_changes: [],
      alignment_overall: { a_overall: true, b_overall: true },
      empty: true,
    };
    const html = renderLibrary(
      {
        sessions: [
          {
            session_id: "s-1",
            created_at: "2026-08-08T09:00:00+00:00",
            intent_text: "happy song",
            parent_session: null,
            overall_match: true,
          },
        ],
        diff,
        error: null,
      },
      initialState(),
    );
    expect(html).toContain("No changes between s-1 and s-2");
  });
});

describe("cards fragments", () => {
  it("without a plan the panel invites interpretation", () => {
    expect(renderCards(initialState())).toContain("Interpret");
  });

  it("fallback interpretation is flagged inline", () => {
    const state = initialState();
    state.fallbackUsed = true;
    state.plan = {
      attributes: [
        { id: "key", value: "C major", class: "global", weight: 1, explanation: "e" },
      ],
      source_text: "x",
    };
    expect(renderCards(state)).toContain("offline lexicon");
  });

  it("global attributes cannot be removed", () => {
    const state = initialState();
    state.plan = {
      attributes: [
        { id: "key", value: "C major", class: "global", weight: 1, explanation: "e" },
        { id: "mood", value: "happy", class: "descriptive", weight: 0.5, explanation: "e" },
      ],
      source_text: "x",
    };
    const html = renderCards(state);
    expect(html).toContain(`class="remove-attr" data-id="mood"`);
    expect(html).not.toContain(`class="remove-attr" data-id="key"`);
  });
});
