// Sketch panel: tick-accurate piano roll, playback, provenance, save.

import { api, ApiError } from "../api";
import { renderRollSvg } from "../pianoroll";
import { SketchPlayer } from "../player";
import { localQuestions } from "../questions";
import type { AppState } from "../state";

const player = new SketchPlayer();

export function renderSketch(state: AppState): string {
  const error = `<div id="sketch-error" class="banner error" hidden></div>`;
  if (!state.sketch) {
    return (
      error +
      `<p class="hint" id="sketch-hint">Sketch the plan to preview it as a piano roll.</p>`
    );
  }
  const prov = state.sketch.provenance;
  const rules = prov.applied_rules.length ? prov.applied_rules.join(", ") : "none";
  const overlayNote = state.priorSketch
    ? `<span class="hint">ghost notes show the previous sketch</span>`
    : "";
  const result = state.lastResult
    ? `<div class="report" id="report">
        <strong>Alignment ${state.lastResult.report.overall_match ? "matches the plan" : "has mismatches"}</strong>
        <ul>${state.lastResult.report.per_attribute
          .map(
            (e) =>
              `<li class="${e.matched ? "ok" : "warn"}">${e.attribute_id}: detected ${JSON.stringify(e.detected)}</li>`,
          )
          .join("")}</ul>
      </div>`
    : "";
  const saved = state.currentSessionId
    ? `<span class="hint" id="saved-as">saved as ${state.currentSessionId}</span>`
    : "";
  return (
    error +
    `<div class="roll-wrap" id="roll">${renderRollSvg(state.sketch, state.priorSketch)}</div>
     <div class="sketch-meta">
       <span>${state.sketch.key} · ${state.sketch.tempo_bpm} bpm · ${state.sketch.meter}</span>
       <span>from <code>${prov.segment_id ?? "?"}</code>, rules: ${rules}</span>
       ${overlayNote}
     </div>
     <div class="sketch-controls">
       <button id="play-btn"${player.available ? "" : " disabled title='audio unavailable'"}>Play</button>
       <button id="stop-btn">Stop</button>
       <button id="save-btn">Render &amp; save to library</button>
       ${saved}
     </div>
     ${result}`
  );
}

export function wireSketch(
  root: HTMLElement,
  state: AppState,
  rerender: () => void,
  refreshLibrary: () => Promise<void>,
): void {
  root.addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "sketch-btn") {
      await makeSketch(root, state, rerender);
    } else if (target.id === "play-btn" && state.sketch) {
      player.play(state.sketch);
    } else if (target.id === "stop-btn") {
      player.stop();
    } else if (target.id === "save-btn") {
      await saveSession(root, state, rerender, refreshLibrary);
    }
  });
}

function showError(root: HTMLElement, error: unknown): void {
  const banner = root.querySelector<HTMLElement>("#sketch-error");
  if (!banner) return;
  let text = String(error);
  if (error instanceof ApiError) {
    if (error.body.code === "empty_database") {
      text = "The segment corpus is empty. Run `musicsketch seed` (or `ingest`) on the server, then sketch again.";
    } else if (error.body.violations) {
      text = `The plan was rejected: ${error.body.violations.map((v) => `${v.subject} (${v.rule})`).join(", ")}`;
    } else {
      text = error.body.message || text;
    }
  }
  banner.textContent = text;
  banner.hidden = false;
}

export async function makeSketch(
  root: HTMLElement,
  state: AppState,
  rerender: () => void,
): Promise<void> {
  if (!state.plan) return;
  try {
    const response = await api.sketch(state.plan, state.currentSessionId ?? state.parentSession);
    const serverQuestions = response.reflective_questions.map((text) => ({
      attributeId: guessAttribute(text, state),
      text,
    }));
    const local = state.questionBaseline
      ? localQuestions(state.questionBaseline, state.plan)
      : [];
    state.questions = serverQuestions.length ? serverQuestions : local;
    state.priorSketch = state.sketch ?? state.priorSketch;
    state.sketch = response.prompt;
    state.questionBaseline = JSON.parse(JSON.stringify(state.plan));
    state.lastResult = null;
    rerender();
  } catch (error) {
    rerender();
    showError(root, error);
  }
}

function guessAttribute(question: string, state: AppState): string | null {
  for (const attr of state.plan?.attributes ?? []) {
    if (question.includes(attr.id) || (attr.id === "tempo" && question.includes("tempo"))) {
      return attr.id;
    }
  }
  return null;
}

async function saveSession(
  root: HTMLElement,
  state: AppState,
  rerender: () => void,
  refreshLibrary: () => Promise<void>,
): Promise<void> {
  if (!state.plan || !state.sketch) return;
  try {
    const rendered = await api.render(state.plan, state.sketch);
    state.lastResult = rendered.result;
    const saved = await api.saveSession({
      plan: state.plan,
      intent_text: state.intentText || state.plan.source_text,
      sketches: [state.sketch],
      results: [rendered.result],
      parent_session: state.parentSession,
    });
    state.currentSessionId = saved.session_id;
    rerender();
    await refreshLibrary();
  } catch (error) {
    rerender();
    showError(root, error);
  }
}
