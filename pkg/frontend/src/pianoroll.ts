// Piano-roll geometry. Every displayed rectangle derives from server tick
// data through these pure functions, so a unit test against fixture prompts
// pins the whole mapping.

import type { NoteEvent, SymbolicPrompt } from "./types";

export interface RollOptions {
  pxPerTick: number;
  rowHeight: number;
  pitchTop: number; // highest pitch drawn at y = 0
}

export const DEFAULT_ROLL: RollOptions = { pxPerTick: 0.08, rowHeight: 7, pitchTop: 108 };

export function ticksPerBar(prompt: SymbolicPrompt): number {
  const [num, den] = prompt.meter.split("/").map(Number);
  return Math.round((prompt.ticks_per_quarter * 4 * (num ?? 4)) / (den ?? 4));
}

export function absoluteTick(barIndex: number, note: NoteEvent, barTicks: number): number {
  return barIndex * barTicks + note.position;
}

export interface NoteRect {
  x: number;
  y: number;
  width: number;
  height: number;
  tick: number;
  pitch: number;
}

export function noteRect(
  barIndex: number,
  note: NoteEvent,
  barTicks: number,
  opts: RollOptions = DEFAULT_ROLL,
): NoteRect {
  const tick = absoluteTick(barIndex, note, barTicks);
  return {
    x: tick * opts.pxPerTick,
    y: (opts.pitchTop - note.pitch) * opts.rowHeight,
    width: note.length * opts.pxPerTick,
    height: opts.rowHeight,
    tick,
    pitch: note.pitch,
  };
}

export function rollRects(prompt: SymbolicPrompt, opts: RollOptions = DEFAULT_ROLL): NoteRect[] {
  const barTicks = ticksPerBar(prompt);
  const rects: NoteRect[] = [];
  prompt.bars.forEach((bar, barIndex) => {
    for (const note of bar) rects.push(noteRect(barIndex, note, barTicks, opts));
  });
  return rects;
}

export function rollSize(prompt: SymbolicPrompt, opts: RollOptions = DEFAULT_ROLL): { width: number; height: number } {
  return {
    width: prompt.bars.length * ticksPerBar(prompt) * opts.pxPerTick,
    height: (opts.pitchTop - 20) * opts.rowHeight,
  };
}

/** SVG markup for a sketch, with an optional prior sketch as a ghost overlay. */
export function renderRollSvg(
  prompt: SymbolicPrompt,
  prior: SymbolicPrompt | null = null,
  opts: RollOptions = DEFAULT_ROLL,
): string {
  const { width, height } = rollSize(prompt, opts);
  const barTicks = ticksPerBar(prompt);
  const barLines = prompt.bars
    .map((_, i) => {
      const x = i * barTicks * opts.pxPerTick;
      return `<line x1="${x}" y1="0" x2="${x}" y2="${height}" class="barline"/>`;
    })
    .join("");
  const ghost = prior
    ? rollRects(prior, opts)
        .map(
          (r) =>
            `<rect class="note ghost" x="${r.x}" y="${r.y}" width="${r.width}" height="${r.height}"/>`,
        )
        .join("")
    : "";
  const notes = rollRects(prompt, opts)
    .map(
      (r) =>
        `<rect class="note" data-tick="${r.tick}" data-pitch="${r.pitch}" ` +
        `x="${r.x}" y="${r.y}" width="${r.width}" height="${r.height}"><title>` +
        `pitch ${r.pitch} @ tick ${r.tick}</title></rect>`,
    )
    .join("");
  return (
    `<svg class="pianoroll" viewBox="0 0 ${Math.max(width, 1)} ${height}" ` +
    `width="100%" preserveAspectRatio="none" role="img" aria-label="piano roll">` +
    `${barLines}${ghost}${notes}</svg>`
  );
}
