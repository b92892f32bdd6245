// Test fixtures are recorded service responses (scripts/record_fixtures.py).
import fs from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

const HERE = path.dirname(fileURLToPath(import.meta.url));

export function loadFixture<T = any>(name: string): T {
  const filePath = path.resolve(HERE, "fixtures", name);
  return JSON.parse(fs.readFileSync(filePath, "utf-8")) as T;
}

export interface ScriptedCall {
  method: string;
  path: string;
  status: number;
  body: unknown;
  /** Reject the fetch promise instead of responding (connection failure). */
  networkError?: boolean;
}

export interface FetchScript {
  fetch: typeof fetch;
  /** Requests actually issued, in order. */
  calls: Array<{ method: string; path: string; body: unknown }>;
  /** Throws if any scripted call was never consumed. */
  assertDone(): void;
}

/**
 * Sequential fetch stub: each request must match the next scripted call's
 * method and path, and receives its recorded status/body. Any deviation
 * throws, so tests fail on unexpected traffic rather than hanging.
 */
export function scriptFetch(script: ScriptedCall[]): FetchScript {
  let cursor = 0;
  const calls: FetchScript["calls"] = [];

  const stub = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = typeof input === "string" ? input : input.toString();
    const method = (init?.method ?? "GET").toUpperCase();
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ method, path: url, body });

    if (cursor >= script.length) {
      throw new Error(`unexpected request ${method} ${url}: script exhausted`);
    }
    const expected = script[cursor];
    cursor += 1;
    if (expected.method !== method || expected.path !== url) {
      throw new Error(
        `request ${method} ${url} does not match scripted ${expected.method} ${expected.path}`,
      );
    }
    if (expected.networkError) {
      throw new TypeError("fetch failed");
    }
    return new Response(JSON.stringify(expected.body), {
      status: expected.status,
      headers: { "content-type": "application/json" },
    });
  };

  return {
    fetch: stub as typeof fetch,
    calls,
    assertDone() {
      if (cursor !== script.length) {
        throw new Error(`script not fully consumed: ${cursor} of ${script.length} calls made`);
      }
    },
  };
}

/** Waits for pending promise callbacks (fetch then-chains) to run. */
export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}

export function textOf(root: ParentNode, selector: string): string {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`no element matches ${selector}`);
  return (node.textContent ?? "").trim();
}

export function allTextOf(root: ParentNode, selector: string): string[] {
  return Array.from(root.querySelectorAll(selector)).map((n) =>
    (n.textContent ?? "").trim(),
  );
}

export function fire(node: EventTarget, type: string): void {
  node.dispatchEvent(new Event(type, { bubbles: true, cancelable: true }));
}

export function setInput(input: HTMLInputElement | HTMLSelectElement, value: string): void {
  input.value = value;
  fire(input, "input");
}
