// Scripted browser flow against a real locally served backend: intent →
// explained cards → tempo edit → reflective question → tick-accurate piano
// roll → saved session → diff. External backends stay stubbed out (the
// server is started with none configured, so interpretation and rendering
// are the offline paths).

import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { setApiBase } from "../src/api";
import { createApp, type App } from "../src/app";

const PORT = 18600 + Math.floor(Math.random() * 1000);
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | null = null;
let app: App;

async function waitFor(check: () => boolean, what: string, timeoutMs = 15000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 50));
  }
}

async function serverReady(): Promise<void> {
  const start = Date.now();
  for (;;) {
    try {
      const response = await fetch(`${BASE}/rules`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() - start > 30000) throw new Error("backend never became ready");
    await new Promise((r) => setTimeout(r, 200));
  }
}

function click(el: Element | null): void {
  if (!el) throw new Error("missing element to click");
  el.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "musicsketch-ui-"));
  const seeded = spawnSync("musicsketch", ["seed", "--corpus", join(workdir, "corpus")], {
    encoding: "utf8",
  });
  if (seeded.status !== 0) throw new Error(`seed failed: ${seeded.stderr}`);
  server = spawn(
    "musicsketch",
    [
      "serve",
      "--corpus", join(workdir, "corpus"),
      "--store", join(workdir, "library"),
      "--host", "127.0.0.1",
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await serverReady();

  setApiBase(BASE);
  document.body.innerHTML = `<div id="app"></div>`;
  app = createApp(document.getElementById("app")!);
}, 60000);

afterAll(() => {
  server?.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

describe("create-workspace flow", () => {
  it("interprets intent into explained, editable attribute cards", async () => {
    const input = document.querySelector<HTMLTextAreaElement>("#intent-text")!;
    input.value = "generate an exciting song";
    click(document.querySelector("#interpret-btn"));
    await waitFor(() => app.state.plan !== null, "plan");

    const cards = [...document.querySelectorAll(".attr-card")];
    expect(cards.length).toBeGreaterThanOrEqual(3);
    const byId: Record<string, Element> = Object.fromEntries(
      cards.map((c) => [c.getAttribute("data-id") ?? "", c]),
    );
    expect(byId["mood"]?.querySelector(".value-select")).toBeTruthy();
    expect(byId["key"]?.querySelector(".class-badge")?.textContent).toBe("global");
    for (const card of cards) {
      expect(card.querySelector(".explanation")?.textContent?.length).toBeGreaterThan(10);
    }
    const moodValue = byId["mood"]?.querySelector<HTMLSelectElement>(".value-select")?.value;
    expect(moodValue).toBe("excited");
  });

  it("editing tempo keeps the card state and shows a reflective question on the next sketch", async () => {
    const bpm = document.querySelector<HTMLInputElement>(".tempo-bpm")!;
    bpm.value = "80";
    bpm.dispatchEvent(new Event("change", { bubbles: true }));
    await waitFor(
      () => (app.state.plan?.attributes.find((a) => a.id === "tempo")?.value as { bpm: number }).bpm === 80,
      "tempo edit",
    );
    expect(document.querySelector(".bucket-badge")?.textContent).toBe("slow");

    click(document.querySelector("#sketch-btn"));
    await waitFor(() => app.state.sketch !== null, "sketch");

    const question = document.querySelector(".reflective-question[data-id='tempo'], .reflective-question");
    expect(question?.textContent).toContain("slower");
    expect(question?.textContent).toContain("80");
  });

  it("piano roll reflects the returned note events tick-accurately", () => {
    const sketch = app.state.sketch!;
    const [num, den] = sketch.meter.split("/").map(Number);
    const barTicks = (sketch.ticks_per_quarter * 4 * num!) / den!;
    const expected = sketch.bars.flatMap((bar, b) =>
      bar.map((n) => ({ tick: b * barTicks + n.position, pitch: n.pitch })),
    );
    const rects = [...document.querySelectorAll(".pianoroll .note:not(.ghost)")].map((r) => ({
      tick: Number(r.getAttribute("data-tick")),
      pitch: Number(r.getAttribute("data-pitch")),
      x: Number(r.getAttribute("x")),
    }));
    expect(rects.length).toBe(expected.length);
    const sortKey = (v: { tick: number; pitch: number }) => v.tick * 1000 + v.pitch;
    const sortedExpected = [...expected].sort((a, b) => sortKey(a) - sortKey(b));
    const sortedGot = [...rects].sort((a, b) => sortKey(a) - sortKey(b));
    sortedGot.forEach((rect, i) => {
      expect(rect.tick).toBe(sortedExpected[i]!.tick);
      expect(rect.pitch).toBe(sortedExpected[i]!.pitch);
      expect(rect.x).toBeCloseTo(rect.tick * 0.08, 5);
    });
    // Sketch applied the edited tempo.
    expect(sketch.tempo_bpm).toBe(80);
    expect(sketch.provenance.segment_id).toMatch(/^seg-/);
  });

  it("saves the session and lists it in the library", async () => {
    click(document.querySelector("#save-btn"));
    await waitFor(() => app.state.currentSessionId !== null, "save");
    await waitFor(() => document.querySelectorAll(".session-row").length === 1, "library row");
    const row = document.querySelector(".session-row")!;
    expect(row.textContent).toContain("generate an exciting song");
    expect(app.state.lastResult?.report.overall_match).toBe(true);
  });

  it("a revised plan produces a second session that diffs against the first", async () => {
    // Change the key and sketch again; the server now fields the coach role.
    const keySelect = document.querySelector<HTMLSelectElement>(".value-select[data-id='key']")!;
    keySelect.value = "A minor";
    keySelect.dispatchEvent(new Event("change", { bubbles: true }));
    click(document.querySelector("#sketch-btn"));
    await waitFor(() => app.state.sketch?.key === "A minor", "re-sketch");
    expect(
      [...document.querySelectorAll(".reflective-question")].some((q) =>
        q.textContent?.includes("key"),
      ),
    ).toBe(true);
    // Ghost overlay of the prior sketch is drawn behind the new notes.
    expect(document.querySelectorAll(".pianoroll .note.ghost").length).toBeGreaterThan(0);

    click(document.querySelector("#save-btn"));
    await waitFor(() => document.querySelectorAll(".session-row").length === 2, "second row");

    const first = document.querySelector<HTMLInputElement>(".diff-check")!;
    first.checked = true;
    first.dispatchEvent(new Event("change", { bubbles: true }));
    await waitFor(() => app.state.diffWith.length === 1, "first selection");
    // The change handler re-rendered the panel, so query the fresh checkbox.
    const second = document.querySelectorAll<HTMLInputElement>(".diff-check")[1]!;
    second.checked = true;
    second.dispatchEvent(new Event("change", { bubbles: true }));
    await waitFor(() => document.querySelector("#diff-view") !== null, "diff view");
    const diffText = document.querySelector("#diff-view")!.textContent!;
    expect(diffText).toContain("key");
    expect(diffText).toContain("A minor");
  });

  it("revise clones a session's plan into the editor with lineage set", async () => {
    const firstRow = [...document.querySelectorAll(".session-row")].at(-1)!;
    const sessionId = firstRow.getAttribute("data-id")!;
    click(firstRow.querySelector(".revise-btn"));
    await waitFor(() => app.state.parentSession === sessionId, "revise");
    expect(app.state.plan).not.toBeNull();
    expect(document.querySelector<HTMLTextAreaElement>("#intent-text")!.value).toContain("exciting");
  });

  it("an empty corpus turns the sketch error into seeding guidance", async () => {
    const emptyPort = PORT + 1;
    const emptyServer = spawn(
      "musicsketch",
      [
        "serve",
        "--corpus", join(workdir, "no-corpus"),
        "--store", join(workdir, "no-store"),
        "--host", "127.0.0.1",
        "--port", String(emptyPort),
      ],
      { stdio: "ignore" },
    );
    try {
      const start = Date.now();
      for (;;) {
        try {
          if ((await fetch(`http://127.0.0.1:${emptyPort}/rules`)).ok) break;
        } catch {
          // booting
        }
        if (Date.now() - start > 30000) throw new Error("empty-corpus server never ready");
        await new Promise((r) => setTimeout(r, 200));
      }
      setApiBase(`http://127.0.0.1:${emptyPort}`);
      app.state.currentSessionId = null;
      app.state.parentSession = null;
      click(document.querySelector("#sketch-btn"));
      await waitFor(() => {
        const banner = document.querySelector<HTMLElement>("#sketch-error");
        return !!banner && !banner.hidden && !!banner.textContent;
      }, "empty-corpus banner");
      expect(document.querySelector("#sketch-error")!.textContent).toContain("seed");
    } finally {
      emptyServer.kill();
      setApiBase(BASE);
    }
  }, 45000);

  it("server going away surfaces a banner without clearing the cards", async () => {
    setApiBase("http://127.0.0.1:1");
    const before = document.querySelectorAll(".attr-card").length;
    const input = document.querySelector<HTMLTextAreaElement>("#intent-text")!;
    input.value = "another idea";
    click(document.querySelector("#interpret-btn"));
    await waitFor(() => {
      const banner = document.querySelector<HTMLElement>("#intent-error");
      return !!banner && !banner.hidden;
    }, "error banner");
    expect(document.querySelectorAll(".attr-card").length).toBe(before);
    setApiBase(BASE);
  });
});
