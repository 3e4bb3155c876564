// Attribute cards: one per planned attribute, value editing constrained to
// the vocabulary so the server can never reject an edit for domain reasons.

import type { AppState } from "../state";
import type { Attribute, TempoValue } from "../types";
import {
  attributeClass,
  attributeIds,
  bpmRange,
  bucketForBpm,
  defaultWeight,
  valueDomain,
} from "../vocab";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function valueEditor(attr: Attribute): string {
  if (attr.id === "tempo") {
    const tempo = attr.value as TempoValue;
    const [lo, hi] = bpmRange();
    return (
      `<input type="number" class="tempo-bpm" data-id="tempo" min="${lo}" max="${hi}" ` +
      `value="${tempo.bpm}" aria-label="tempo bpm"/>` +
      `<span class="bucket-badge">${tempo.bucket}</span>`
    );
  }
  const domain = valueDomain(attr.id) ?? [];
  const options = domain
    .map(
      (v) =>
        `<option value="${escapeHtml(v)}"${v === attr.value ? " selected" : ""}>${escapeHtml(v)}</option>`,
    )
    .join("");
  return `<select class="value-select" data-id="${attr.id}" aria-label="${attr.id} value">${options}</select>`;
}

function questionBox(state: AppState, attrId: string): string {
  const q = state.questions.find((q) => q.attributeId === attrId);
  if (!q) return "";
  return (
    `<div class="reflective-question" data-id="${attrId}">` +
    `<span>${escapeHtml(q.text)}</span>` +
    `<button class="dismiss-question" data-id="${attrId}" aria-label="dismiss">×</button></div>`
  );
}

export function renderCards(state: AppState): string {
  if (!state.plan) {
    return `<p class="hint">Describe the music you imagine, then press Interpret.</p>`;
  }
  const cards = state.plan.attributes
    .map(
      (attr) => `
      <div class="attr-card" data-id="${attr.id}">
        <div class="attr-head">
          <span class="attr-name">${attr.id}</span>
          <span class="class-badge class-${attr.class}">${attr.class}</span>
          <label class="weight">w
            <input type="number" class="weight-input" data-id="${attr.id}"
                   min="0" max="1" step="0.05" value="${attr.weight}" aria-label="${attr.id} weight"/>
          </label>
          ${attr.class === "global" ? "" : `<button class="remove-attr" data-id="${attr.id}" title="remove attribute">remove</button>`}
        </div>
        <div class="attr-value">${valueEditor(attr)}</div>
        <p class="explanation">${escapeHtml(attr.explanation)}</p>
        ${attr.reflective_question ? `<div class="reflective-question"><span>${escapeHtml(attr.reflective_question)}</span></div>` : ""}
        ${questionBox(state, attr.id)}
      </div>`,
    )
    .join("");
  const fallback = state.fallbackUsed
    ? `<div class="banner info">External interpreter unavailable; offline lexicon used.</div>`
    : "";
  const unused = attributeIds.filter((id) => !state.plan?.attributes.some((a) => a.id === id));
  const addRow = unused.length
    ? `<div class="add-attr-row">
        <select id="add-attr-select" aria-label="add attribute">
          ${unused.map((id) => `<option value="${id}">${id}</option>`).join("")}
        </select>
        <button id="add-attr-btn">Add attribute</button>
      </div>`
    : "";
  return fallback + `<div class="cards" id="cards-grid">${cards}</div>` + addRow;
}

export function wireCards(
  root: HTMLElement,
  state: AppState,
  rerender: () => void,
): void {
  root.addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (!state.plan) return;
    const id = target.getAttribute("data-id");
    if (!id) return;
    const attr = state.plan.attributes.find((a) => a.id === id);
    if (!attr) return;
    if (target.classList.contains("value-select")) {
      attr.value = (target as HTMLSelectElement).value;
      rerender();
    } else if (target.classList.contains("tempo-bpm")) {
      const input = target as HTMLInputElement;
      const [lo, hi] = bpmRange();
      const bpm = Math.min(hi, Math.max(lo, Number(input.value) || lo));
      attr.value = { bpm, bucket: bucketForBpm(bpm) };
      rerender();
    } else if (target.classList.contains("weight-input")) {
      const weight = Number((target as HTMLInputElement).value);
      attr.weight = Math.min(1, Math.max(0, isNaN(weight) ? attr.weight : weight));
      rerender();
    }
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.classList.contains("dismiss-question")) {
      const id = target.getAttribute("data-id");
      state.questions = state.questions.filter((q) => q.attributeId !== id);
      rerender();
    } else if (target.classList.contains("remove-attr") && state.plan) {
      const id = target.getAttribute("data-id");
      state.plan.attributes = state.plan.attributes.filter((a) => a.id !== id);
      rerender();
    } else if (target.id === "add-attr-btn" && state.plan) {
      const select = root.querySelector<HTMLSelectElement>("#add-attr-select");
      const id = select?.value;
      if (!id) return;
      const domain = valueDomain(id);
      const value =
        id === "tempo" ? { bpm: 100, bucket: bucketForBpm(100) } : (domain?.[0] ?? "");
      state.plan.attributes.push({
        id,
        value,
        class: attributeClass(id),
        weight: defaultWeight(id),
        explanation: "Added by hand; sketch to see its effect.",
      });
      rerender();
    }
  });
}
