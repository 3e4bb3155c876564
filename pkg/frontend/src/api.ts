// Thin typed client over the JSON endpoints. Errors carry the server's
// structured {code, message} body so panels can show actionable banners.

import type {
  AttributeSet,
  RenderResult,
  SessionDiff,
  SessionEntry,
  SessionSummary,
  SketchResponse,
  StructuredError,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: StructuredError,
  ) {
    super(body.message || `HTTP ${status}`);
  }
}

let baseUrl = "";

/** Point the client somewhere else (tests drive a real server on a port). */
export function setApiBase(url: string): void {
  baseUrl = url.replace(/\/$/, "");
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(baseUrl + path, init);
  } catch (err) {
    throw new ApiError(0, { code: "unreachable", message: String(err) });
  }
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, body as StructuredError);
  }
  return body as T;
}

function post<T>(path: string, payload: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export interface InterpretResponse {
  plan: AttributeSet;
  fallback_used: boolean;
}

export const api = {
  interpret: (text: string) => post<InterpretResponse>("/interpret", { text }),

  sketch: (plan: AttributeSet, priorSession?: string | null) =>
    post<SketchResponse>("/sketch", {
      plan,
      ...(priorSession ? { prior_session: priorSession } : {}),
    }),

  render: (plan: AttributeSet, prompt: unknown) =>
    post<{ result: RenderResult }>("/render", { plan, prompt, backend: "local_synth" }),

  saveSession: (payload: {
    plan: AttributeSet;
    intent_text: string;
    sketches: unknown[];
    results: unknown[];
    parent_session?: string | null;
  }) => post<{ session_id: string }>("/sessions", payload),

  listSessions: () => request<{ sessions: SessionSummary[] }>("/sessions"),

  getSession: (id: string) => request<SessionEntry>(`/sessions/${id}`),

  diffSessions: (a: string, b: string) => request<SessionDiff>(`/sessions/${a}/diff/${b}`),

  rules: () =>
    request<{ rules: { name: string; applies_to: string; description: string }[] }>("/rules"),

  starters: () => request<{ starters: string[] }>("/starters"),
};
