// Coach-role questions for plan edits made in the editor. Revisions of a
// saved session get their questions from the server; this covers the gap
// before anything is archived, with matching wording.

import type { AttributeSet, TempoValue } from "./types";
import { displayValue } from "./vocab";

export interface CardQuestion {
  attributeId: string | null;
  text: string;
}

export function localQuestions(before: AttributeSet, after: AttributeSet): CardQuestion[] {
  const prior = new Map(before.attributes.map((a) => [a.id, a]));
  const out: CardQuestion[] = [];
  for (const attr of after.attributes) {
    const old = prior.get(attr.id);
    if (!old) {
      out.push({
        attributeId: attr.id,
        text: `You added ${attr.id} = ${displayValue(attr.id, attr.value)}. What should it bring to the piece?`,
      });
      continue;
    }
    if (JSON.stringify(old.value) === JSON.stringify(attr.value)) continue;
    const oldText = displayValue(attr.id, old.value);
    const newText = displayValue(attr.id, attr.value);
    if (attr.id === "tempo") {
      const slower = (attr.value as TempoValue).bpm < (old.value as TempoValue).bpm;
      out.push({
        attributeId: attr.id,
        text:
          `You changed the tempo from ${oldText} to ${newText}. ` +
          `Does the ${slower ? "slower" : "faster"} pace still convey the feeling you intended?`,
      });
    } else {
      out.push({
        attributeId: attr.id,
        text: `You changed ${attr.id} from ${oldText} to ${newText}. How does that change what the music expresses?`,
      });
    }
  }
  return out;
}
