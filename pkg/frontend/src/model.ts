/** Wire types mirroring the service JSON payloads, plus the defensive
 * check that challenge data never smuggles flag material into the client.
 */

export interface EndpointSpec {
  kind: "tcp" | "http" | "ssh";
  port: number;
}

export interface Challenge {
  id: string;
  event: string;
  year: number;
  category: string;
  category_label: string;
  points: number;
  title: string;
  description: string;
  artifacts: string[];
  endpoints: EndpointSpec[];
}

export interface BoundEndpoint {
  kind: string;
  host: string;
  port: number;
  hint: string;
}

export interface Instance {
  instance_id: string;
  challenge_id: string;
  state: "created" | "running" | "stopped";
  endpoints: BoundEndpoint[];
  workspace_mount: string;
}

export interface SubmitResult {
  verdict: "correct" | "incorrect";
  platform_flag?: string;
  first_solve: boolean;
  solved_before: boolean;
}

export interface Solve {
  challenge_id: string;
  timestamp: number;
}

export interface StatsRow {
  category: string;
  available: number;
  solves: number;
}

export interface ErrorPayload {
  code: string;
  message: string;
}

/** Raised when a payload carries fields the service promises never to send. */
export class FlagMaterialError extends Error {}

const FORBIDDEN_KEYS = new Set(["flag", "digest", "platform_flag", "flag_spec"]);
const HEX_DIGEST = /^[0-9a-f]{64}$/;

/**
 * Reject any challenge payload that contains flag material.
 *
 * The server strips flags, digests, and platform flags before they reach
 * the wire; if one shows up anyway the client must refuse to render or
 * cache it rather than trust a broken (or hostile) server. Checks key
 * names recursively and string values shaped like a SHA-256 digest.
 */
export function assertNoFlagMaterial(value: unknown, where = "payload"): void {
  if (typeof value === "string") {
    if (HEX_DIGEST.test(value)) {
      throw new FlagMaterialError(`${where} contains a digest-shaped value`);
    }
    return;
  }
  if (Array.isArray(value)) {
    value.forEach((item, i) => assertNoFlagMaterial(item, `${where}[${i}]`));
    return;
  }
  if (value !== null && typeof value === "object") {
    for (const [key, inner] of Object.entries(value)) {
      if (FORBIDDEN_KEYS.has(key)) {
        throw new FlagMaterialError(`${where} contains forbidden key ${key}`);
      }
      assertNoFlagMaterial(inner, `${where}.${key}`);
    }
  }
}
