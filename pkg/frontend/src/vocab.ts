// Dropdown domains come straight from the packaged vocabulary file, the same
// one the server validates against; the schema-lockstep check keeps the copy
// honest. The UI therefore cannot submit a value the server would reject.

import vocabulary from "./vocabulary.json";
import type { AttributeClass, AttributeValue, TempoValue } from "./types";

interface VocabAttribute {
  class: AttributeClass;
  values?: string[];
  bpm_min?: number;
  bpm_max?: number;
  buckets?: Record<string, [number, number]>;
  bucket_default_bpm?: Record<string, number>;
}

const attributes = vocabulary.attributes as unknown as Record<string, VocabAttribute>;

export const attributeIds = Object.keys(attributes);

export function attributeClass(id: string): AttributeClass {
  return attributes[id]?.class ?? "descriptive";
}

export function valueDomain(id: string): string[] | null {
  return attributes[id]?.values ?? null;
}

export function bpmRange(): [number, number] {
  const tempo = attributes["tempo"];
  return [tempo?.bpm_min ?? 40, tempo?.bpm_max ?? 240];
}

export function bucketForBpm(bpm: number): TempoValue["bucket"] {
  const buckets = attributes["tempo"]?.buckets ?? {};
  for (const [name, range] of Object.entries(buckets)) {
    if (bpm >= range[0] && bpm <= range[1]) return name as TempoValue["bucket"];
  }
  return "medium";
}

export function defaultWeight(id: string): number {
  const classes = vocabulary.classes as Record<string, { default_weight: number }>;
  return classes[attributeClass(id)]?.default_weight ?? 0.5;
}

export function displayValue(id: string, value: AttributeValue): string {
  if (id === "tempo" && typeof value === "object") {
    return `${value.bpm} bpm (${value.bucket})`;
  }
  return String(value);
}
