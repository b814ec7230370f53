/** Shared fixtures: canned payloads and a scriptable fetch stub. */

import { Challenge, Instance, StatsRow } from "../src/model.js";

export function challenge(overrides: Partial<Challenge> = {}): Challenge {
  return {
    id: "rsa-intro",
    event: "demo-ctf",
    year: 2024,
    category: "cryptography",
    category_label: "Cryptography",
    points: 100,
    title: "RSA Intro",
    description: "Recover the message.",
    artifacts: ["dist/handout.txt"],
    endpoints: [{ kind: "tcp", port: 4242 }],
    ...overrides,
  };
}

export function instance(overrides: Partial<Instance> = {}): Instance {
  return {
    instance_id: "inst-1",
    challenge_id: "rsa-intro",
    state: "running",
    endpoints: [
      { kind: "tcp", host: "127.0.0.1", port: 31337, hint: "nc 127.0.0.1 31337" },
    ],
    workspace_mount: "/home/user",
    ...overrides,
  };
}

export const STATS_ROWS: StatsRow[] = [
  { category: "Cryptography", available: 2, solves: 3 },
  { category: "Web Exploitation", available: 1, solves: 0 },
  { category: "Total", available: 3, solves: 3 },
];

export interface RecordedCall {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: string | null;
}

export type FetchStub = ((input: string, init?: RequestInit) => Promise<Response>) & {
  calls: RecordedCall[];
};

/** fetch stub answering each URL from a routing function. */
export function stubFetch(
  route: (url: string, init: RequestInit) => Response | Promise<Response>,
): FetchStub {
  const calls: RecordedCall[] = [];
  const fn = async (input: string, init: RequestInit = {}): Promise<Response> => {
    calls.push({
      url: input,
      method: init.method ?? "GET",
      headers: { ...(init.headers as Record<string, string>) },
      body: typeof init.body === "string" ? init.body : null,
    });
    return route(input, init);
  };
  return Object.assign(fn, { calls });
}

export function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
