/** Thin fetch client for the acquisition service. No retries, no caching. */

import type {
  CreateSessionRequest,
  CreateSessionResponse,
  ErrorBody,
  ObserveResponse,
  SessionState,
} from "./types.js";

/** Non-2xx response, with the parsed error body when one was sent. */
export class ApiError extends Error {
  readonly status: number;
  readonly body: ErrorBody | null;

  constructor(status: number, body: ErrorBody | null) {
    super(body ? body.error : `request failed with status ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.body = body;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (resp.status === 204) {
    return undefined as T;
  }
  if (!resp.ok) {
    let body: ErrorBody | null = null;
    try {
      body = (await resp.json()) as ErrorBody;
    } catch {
      body = null;
    }
    throw new ApiError(resp.status, body);
  }
  return (await resp.json()) as T;
}

export function createSession(
  base: string,
  body: CreateSessionRequest,
): Promise<CreateSessionResponse> {
  return request(base, "/sessions", { method: "POST", body: JSON.stringify(body) });
}

export function observe(
  base: string,
  sessionId: string,
  feature: number,
  value: number,
): Promise<ObserveResponse> {
  return request(base, `/sessions/${sessionId}/observe`, {
    method: "POST",
    body: JSON.stringify({ feature, value }),
  });
}

export function getState(base: string, sessionId: string): Promise<SessionState> {
  return request(base, `/sessions/${sessionId}`);
}

export function closeSession(base: string, sessionId: string): Promise<void> {
  return request(base, `/sessions/${sessionId}`, { method: "DELETE" });
}
