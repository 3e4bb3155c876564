// JSON shapes mirroring the server's published schema files.

export type AttributeClass = "descriptive" | "global" | "local";

export type TempoValue = { bpm: number; bucket: "slow" | "medium" | "fast" };
export type AttributeValue = string | TempoValue;

export interface Attribute {
  id: string;
  value: AttributeValue;
  class: AttributeClass;
  weight: number;
  explanation: string;
  reflective_question?: string | null;
}

export interface AttributeSet {
  attributes: Attribute[];
  source_text: string;
}

export interface NoteEvent {
  pitch: number;
  position: number;
  length: number;
  velocity: number;
}

export interface Provenance {
  segment_id: string | null;
  applied_rules: string[];
  notes: string[];
}

export interface SymbolicPrompt {
  tempo_bpm: number;
  key: string;
  meter: string;
  ticks_per_quarter: number;
  bars: NoteEvent[][];
  provenance: Provenance;
}

export interface AlignmentEntry {
  attribute_id: string;
  requested: unknown;
  detected: unknown;
  matched: boolean;
  explanation: string;
}

export interface AlignmentReport {
  per_attribute: AlignmentEntry[];
  overall_match: boolean;
}

export interface RenderResult {
  output_ref: string;
  backend: "local_synth" | "external_lmm";
  report: AlignmentReport;
  request_hash: string | null;
  caveats: string[];
}

export interface SessionSummary {
  session_id: string;
  created_at: string;
  intent_text: string;
  parent_session: string | null;
  overall_match: boolean | null;
}

export interface SessionEntry {
  session_id: string;
  created_at: string;
  intent_text: string;
  plan: AttributeSet;
  sketches: SymbolicPrompt[];
  results: RenderResult[];
  parent_session: string | null;
}

export interface PlanChange {
  id: string;
  a_value: unknown;
  b_value: unknown;
  a_weight: number | null;
  b_weight: number | null;
}

export interface SessionDiff {
  a: string;
  b: string;
  plan_changes: PlanChange[];
  sketches: { a_count: number; b_count: number; a_rules: string[]; b_rules: string[] };
  alignment_changes: { id: string; a_matched: boolean | null; b_matched: boolean | null }[];
  alignment_overall: { a_overall: boolean | null; b_overall: boolean | null };
  empty: boolean;
}

export interface SketchResponse {
  prompt: SymbolicPrompt;
  midi_base64: string;
  provenance: Provenance;
  reflective_questions: string[];
}

export interface StructuredError {
  code: string;
  message: string;
  violations?: { subject: string; rule: string; message: string }[];
}
