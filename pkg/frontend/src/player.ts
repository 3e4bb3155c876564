// In-browser sketch playback with a plain oscillator voice. Fidelity is not
// the point; hearing structural changes is.

import type { SymbolicPrompt } from "./types";
import { absoluteTick, ticksPerBar } from "./pianoroll";

function midiToHz(pitch: number): number {
  return 440 * Math.pow(2, (pitch - 69) / 12);
}

export class SketchPlayer {
  private context: AudioContext | null = null;
  private active: { osc: OscillatorNode; gain: GainNode }[] = [];
  private stopTimer: ReturnType<typeof setTimeout> | null = null;
  onended: (() => void) | null = null;

  get available(): boolean {
    return typeof AudioContext !== "undefined";
  }

  get playing(): boolean {
    return this.active.length > 0;
  }

  play(prompt: SymbolicPrompt): void {
    if (!this.available) return;
    this.stop();
    this.context ??= new AudioContext();
    const ctx = this.context;
    const secondsPerTick = 60 / prompt.tempo_bpm / prompt.ticks_per_quarter;
    const barTicks = ticksPerBar(prompt);
    const now = ctx.currentTime + 0.05;
    let end = 0;

    prompt.bars.forEach((bar, barIndex) => {
      for (const note of bar) {
        const start = now + absoluteTick(barIndex, note, barTicks) * secondsPerTick;
        const stop = start + note.length * secondsPerTick;
        end = Math.max(end, stop);
        const osc = ctx.createOscillator();
        const gain = ctx.createGain();
        osc.type = "triangle";
        osc.frequency.value = midiToHz(note.pitch);
        const level = (note.velocity / 127) * 0.25;
        gain.gain.setValueAtTime(0, start);
        gain.gain.linearRampToValueAtTime(level, start + 0.01);
        gain.gain.setTargetAtTime(0, stop - 0.03, 0.02);
        osc.connect(gain).connect(ctx.destination);
        osc.start(start);
        osc.stop(stop + 0.05);
        this.active.push({ osc, gain });
      }
    });

    this.stopTimer = setTimeout(() => {
      this.active = [];
      this.onended?.();
    }, Math.max(0, (end - ctx.currentTime) * 1000 + 100));
  }

  stop(): void {
    if (this.stopTimer) clearTimeout(this.stopTimer);
    this.stopTimer = null;
    for (const { osc } of this.active) {
      try {
        osc.stop();
      } catch {
        // already stopped
      }
    }
    this.active = [];
  }
}
