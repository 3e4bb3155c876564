import type { AttributeSet, RenderResult, SymbolicPrompt } from "./types";

export interface AppState {
  intentText: string;
  plan: AttributeSet | null;
  fallbackUsed: boolean;
  /** Baseline plan the coach compares edits against (interpreted or last sketched). */
  questionBaseline: AttributeSet | null;
  sketch: SymbolicPrompt | null;
  priorSketch: SymbolicPrompt | null;
  lastResult: RenderResult | null;
  questions: { attributeId: string | null; text: string }[];
  currentSessionId: string | null;
  parentSession: string | null;
  diffWith: string[];
}

export function initialState(): AppState {
  return {
    intentText: "",
    plan: null,
    fallbackUsed: false,
    questionBaseline: null,
    sketch: null,
    priorSketch: null,
    lastResult: null,
    questions: [],
    currentSessionId: null,
    parentSession: null,
    diffWith: [],
  };
}
