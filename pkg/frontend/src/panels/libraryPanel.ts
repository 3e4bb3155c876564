// Music library: newest-first history, two-session diff, revise into editor.

import { api, ApiError } from "../api";
import type { AppState } from "../state";
import type { SessionDiff, SessionSummary } from "../types";
import { displayValue } from "../vocab";

export interface LibraryState {
  sessions: SessionSummary[];
  diff: SessionDiff | null;
  error: string | null;
}

export function renderLibrary(lib: LibraryState, state: AppState): string {
  if (lib.error) {
    return `<div class="banner error">${lib.error}</div>`;
  }
  if (!lib.sessions.length) {
    return `<p class="hint" id="library-hint">Nothing archived yet. Sketch something and save it, then come back to compare attempts.</p>`;
  }
  const rows = lib.sessions
    .map(
      (s) => `
      <div class="session-row" data-id="${s.session_id}">
        <input type="checkbox" class="diff-check" data-id="${s.session_id}"
               ${state.diffWith.includes(s.session_id) ? "checked" : ""} aria-label="select for diff"/>
        <div class="session-info">
          <strong>${s.intent_text || "(untitled)"}</strong>
          <span class="hint">${s.session_id} · ${s.created_at}${s.parent_session ? ` · revises ${s.parent_session}` : ""}</span>
        </div>
        <span class="match-dot ${s.overall_match === null ? "unknown" : s.overall_match ? "ok" : "warn"}"
              title="alignment">${s.overall_match === null ? "–" : s.overall_match ? "match" : "off-plan"}</span>
        <button class="revise-btn" data-id="${s.session_id}">revise</button>
      </div>`,
    )
    .join("");
  return `<div id="sessions-list">${rows}</div>${renderDiff(lib.diff)}`;
}

function renderDiff(diff: SessionDiff | null): string {
  if (!diff) {
    return `<p class="hint">Select two sessions to compare their plans.</p>`;
  }
  if (diff.empty) {
    return `<div id="diff-view"><p class="hint">No changes between ${diff.a} and ${diff.b}.</p></div>`;
  }
  const planRows = diff.plan_changes
    .map(
      (c) => `
      <tr>
        <td>${c.id}</td>
        <td>${c.a_value === null ? "—" : displayValue(c.id, c.a_value as never)}</td>
        <td>${c.b_value === null ? "—" : displayValue(c.id, c.b_value as never)}</td>
      </tr>`,
    )
    .join("");
  const alignRows = diff.alignment_changes
    .map((c) => `<li>${c.id}: ${c.a_matched} → ${c.b_matched}</li>`)
    .join("");
  return `
    <div id="diff-view">
      <h3>${diff.a} vs ${diff.b}</h3>
      <table class="diff-table">
        <thead><tr><th>attribute</th><th>${diff.a}</th><th>${diff.b}</th></tr></thead>
        <tbody>${planRows || `<tr><td colspan="3">plans identical</td></tr>`}</tbody>
      </table>
      ${alignRows ? `<ul class="align-deltas">${alignRows}</ul>` : ""}
    </div>`;
}

export function wireLibrary(
  root: HTMLElement,
  lib: LibraryState,
  state: AppState,
  rerender: () => void,
  openInEditor: (sessionId: string) => Promise<void>,
): void {
  root.addEventListener("change", async (event) => {
    const target = event.target as HTMLElement;
    if (!target.classList.contains("diff-check")) return;
    const id = target.getAttribute("data-id");
    if (!id) return;
    if ((target as HTMLInputElement).checked) {
      state.diffWith = [...state.diffWith.slice(-1), id];
    } else {
      state.diffWith = state.diffWith.filter((x) => x !== id);
    }
    if (state.diffWith.length === 2) {
      const [a, b] = state.diffWith as [string, string];
      try {
        lib.diff = await api.diffSessions(a, b);
      } catch (error) {
        if (error instanceof ApiError && error.status === 404) {
          await refreshLibrary(lib);
          lib.diff = null;
        }
      }
    } else {
      lib.diff = null;
    }
    rerender();
  });

  root.addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    if (target.classList.contains("revise-btn")) {
      const id = target.getAttribute("data-id");
      if (id) await openInEditor(id);
    }
  });
}

export async function refreshLibrary(lib: LibraryState): Promise<void> {
  try {
    lib.sessions = (await api.listSessions()).sessions;
    lib.error = null;
  } catch (error) {
    lib.error = error instanceof ApiError ? error.body.message || "server unreachable" : String(error);
  }
}
