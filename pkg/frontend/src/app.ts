// Application shell: the four panels of the create workspace wired together.

import { api, ApiError } from "./api";
import { renderCards, wireCards } from "./panels/cards";
import {
  LibraryState,
  refreshLibrary,
  renderLibrary,
  wireLibrary,
} from "./panels/libraryPanel";
import { makeSketch, renderSketch, wireSketch } from "./panels/sketch";
import { AppState, initialState } from "./state";

export interface App {
  state: AppState;
  library: LibraryState;
  render: () => void;
  refreshLibrary: () => Promise<void>;
}

export function createApp(root: HTMLElement): App {
  const state = initialState();
  const library: LibraryState = { sessions: [], diff: null, error: null };

  root.innerHTML = `
    <header class="topbar"><h1>musicsketch</h1>
      <span class="hint">describe it, shape it, hear it, keep it</span></header>
    <main class="workspace">
      <section class="panel" id="intent-panel" aria-label="intent">
        <h2>1 · Describe</h2>
        <div id="intent-error" class="banner error" hidden></div>
        <textarea id="intent-text" rows="3"
          placeholder="e.g. a jazz ballad, melancholic, minor key, slow tempo, swing rhythm"></textarea>
        <div class="intent-controls">
          <select id="starter-select" aria-label="starter prompts">
            <option value="">starter prompts…</option>
          </select>
          <button id="interpret-btn">Interpret</button>
        </div>
      </section>
      <section class="panel" id="cards-panel" aria-label="attributes">
        <h2>2 · Shape <span class="hint">every attribute explains itself</span></h2>
        <div id="cards"></div>
        <div class="panel-actions"><button id="sketch-btn">Sketch it</button></div>
      </section>
      <section class="panel" id="sketch-panel" aria-label="sketch">
        <h2>3 · Hear</h2>
        <div id="sketch"></div>
      </section>
      <section class="panel" id="library-panel" aria-label="library">
        <h2>4 · Keep &amp; compare</h2>
        <div id="library"></div>
      </section>
    </main>`;

  const cardsHost = root.querySelector<HTMLElement>("#cards")!;
  const sketchHost = root.querySelector<HTMLElement>("#sketch")!;
  const libraryHost = root.querySelector<HTMLElement>("#library")!;

  function render(): void {
    cardsHost.innerHTML = renderCards(state);
    sketchHost.innerHTML = renderSketch(state);
    libraryHost.innerHTML = renderLibrary(library, state);
  }

  const doRefreshLibrary = async () => {
    await refreshLibrary(library);
    render();
  };

  wireCards(cardsHost, state, render);
  wireSketch(root, state, render, doRefreshLibrary);
  wireLibrary(libraryHost, library, state, render, openInEditor);

  root.querySelector("#interpret-btn")!.addEventListener("click", () => void interpretIntent());
  root.querySelector("#starter-select")!.addEventListener("change", (event) => {
    const value = (event.target as HTMLSelectElement).value;
    if (!value) return;
    root.querySelector<HTMLTextAreaElement>("#intent-text")!.value = value;
  });

  async function interpretIntent(): Promise<void> {
    const input = root.querySelector<HTMLTextAreaElement>("#intent-text")!;
    const banner = root.querySelector<HTMLElement>("#intent-error")!;
    banner.hidden = true;
    try {
      const response = await api.interpret(input.value);
      state.intentText = input.value;
      state.plan = response.plan;
      state.fallbackUsed = response.fallback_used;
      state.questionBaseline = JSON.parse(JSON.stringify(response.plan));
      state.sketch = null;
      state.priorSketch = null;
      state.lastResult = null;
      state.questions = [];
      state.currentSessionId = null;
      state.parentSession = null;
      render();
    } catch (error) {
      // Cards stay exactly as they were; only the banner changes.
      banner.textContent =
        error instanceof ApiError
          ? error.status === 0
            ? "Server unreachable; is `musicsketch serve` running?"
            : error.body.message || "request failed"
          : String(error);
      banner.hidden = false;
    }
  }

  async function openInEditor(sessionId: string): Promise<void> {
    const entry = await api.getSession(sessionId);
    state.intentText = entry.intent_text;
    state.plan = JSON.parse(JSON.stringify(entry.plan));
    state.fallbackUsed = false;
    state.questionBaseline = JSON.parse(JSON.stringify(entry.plan));
    state.priorSketch = entry.sketches[entry.sketches.length - 1] ?? null;
    state.sketch = null;
    state.lastResult = null;
    state.questions = [];
    state.currentSessionId = null;
    state.parentSession = sessionId;
    root.querySelector<HTMLTextAreaElement>("#intent-text")!.value = entry.intent_text;
    render();
  }

  void (async () => {
    try {
      const { starters } = await api.starters();
      const select = root.querySelector<HTMLSelectElement>("#starter-select")!;
      for (const text of starters) {
        const option = document.createElement("option");
        option.value = text;
        option.textContent = text;
        select.append(option);
      }
    } catch {
      // starters are a convenience; the panel works without them
    }
    await doRefreshLibrary();
  })();

  render();
  return { state, library, render, refreshLibrary: doRefreshLibrary };
}

export { makeSketch };
