import { readFileSync } from "node:fs";
import { resolve } from "node:path";

import { ApiClient } from "../src/api.js";

export function fixture<T>(name: string): T {
  const path = resolve(process.cwd(), "tests", "fixtures", `${name}.json`);
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
}

/** An ApiClient whose fetch replays recorded fixtures and logs every call. */
export function fixtureClient(): { client: ApiClient; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const demo = fixture<{ session_id: string; summary: unknown }>("demo_session");

  const routes: Array<[RegExp, string, () => unknown]> = [
    [/^POST \/demo\/datasets$/, "demo", () => demo],
    [/^POST \/sessions$/, "create", () => ({ session_id: demo.session_id })],
    [/^GET \/sessions\/[^/]+$/, "summary", () => demo.summary],
    [/^GET \/sessions\/[^/]+\/matchers$/, "catalog", () => fixture("catalog")],
    [/^POST \/sessions\/[^/]+\/match$/, "match", () => ({ job_id: "job1" })],
    [/^GET \/jobs\/[^/]+$/, "job", () => fixture("job_done")],
    [/^POST \/sessions\/[^/]+\/audit$/, "audit", () => fixture("audit")],
    [
      /^POST \/sessions\/[^/]+\/audit\/multiworkload$/,
      "multiworkload",
      () => fixture("multiworkload"),
    ],
    [/^POST \/sessions\/[^/]+\/explain$/, "explain", () => fixture("explain")],
    [/^POST \/sessions\/[^/]+\/resolve$/, "resolve", () => fixture("resolution")],
    [/^POST \/sessions\/[^/]+\/resolve\/strategy$/, "strategy", () => fixture("strategy")],
  ];

  const fakeFetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const method = init?.method ?? "GET";
    const key = `${method} ${path}`;
    for (const [pattern, , produce] of routes) {
      if (pattern.test(key)) {
        calls.push({
          method,
          path,
          body: typeof init?.body === "string" ? JSON.parse(init.body) : init?.body ?? null,
        });
        return new Response(JSON.stringify(produce()), {
          status: 200,
          headers: { "content-type": "application/json" },
        });
      }
    }
    throw new Error(`unrouted request: ${key}`);
  }) as typeof fetch;

  return { client: new ApiClient("http://service", fakeFetch), calls };
}
