/** Typed client for the archive service HTTP API.
 *
 * Every method maps to one service route; nothing else is ever called,
 * so the client works against any deployment of the service unchanged.
 */

import {
  assertNoFlagMaterial,
  Challenge,
  Instance,
  Solve,
  StatsRow,
  SubmitResult,
} from "./model.js";

/** Server-reported failure: carries the machine code from the error payload. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

/** The server could not be reached at all (DNS, refused, aborted). */
export class ConnectionError extends Error {}

export interface Filters {
  event?: string;
  year?: string;
  category?: string;
}

type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly token: string,
    private readonly baseUrl = "",
    // wrapped so the browser's fetch keeps its window receiver
    private readonly fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  private async raw(method: string, path: string, body?: unknown): Promise<Response> {
    const init: RequestInit = {
      method,
      headers: { Authorization: `Bearer ${this.token}` },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ConnectionError(`cannot reach the archive service: ${err}`);
    }
    if (!response.ok) {
      let code = "internal";
      let message = `request failed with status ${response.status}`;
      try {
        const payload = (await response.json()) as { code?: string; message?: string };
        if (typeof payload.code === "string") code = payload.code;
        if (typeof payload.message === "string") message = payload.message;
      } catch {
        // non-JSON error body; keep the status-derived message
      }
      throw new ApiError(response.status, code, message);
    }
    return response;
  }

  private async json<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.raw(method, path, body);
    return (await response.json()) as T;
  }

  async listChallenges(filters: Filters = {}): Promise<Challenge[]> {
    const params = new URLSearchParams();
    if (filters.event) params.set("event", filters.event);
    if (filters.year) params.set("year", filters.year);
    if (filters.category) params.set("category", filters.category);
    const qs = params.toString();
    const payload = await this.json<{ challenges: Challenge[] }>(
      "GET",
      `/api/challenges${qs ? `?${qs}` : ""}`,
    );
    assertNoFlagMaterial(payload, "challenge list");
    return payload.challenges;
  }

  async getChallenge(id: string): Promise<Challenge> {
    const payload = await this.json<Challenge>(
      "GET",
      `/api/challenges/${encodeURIComponent(id)}`,
    );
    assertNoFlagMaterial(payload, "challenge detail");
    return payload;
  }

  artifactPath(challengeId: string, artifact: string): string {
    // artifact paths contain slashes that must survive into the route
    const parts = artifact.split("/").map(encodeURIComponent).join("/");
    return `/api/challenges/${encodeURIComponent(challengeId)}/artifacts/${parts}`;
  }

  async fetchArtifact(challengeId: string, artifact: string): Promise<ArrayBuffer> {
    const response = await this.raw("GET", this.artifactPath(challengeId, artifact));
    return response.arrayBuffer();
  }

  async submitFlag(challengeId: string, flag: string): Promise<SubmitResult> {
    // the submit response is the one payload allowed to carry a platform
    // flag: it is the reward released on a correct answer
    return this.json<SubmitResult>(
      "POST",
      `/api/challenges/${encodeURIComponent(challengeId)}/submit`,
      { flag },
    );
  }

  async createInstance(challengeId: string): Promise<Instance> {
    const payload = await this.json<Instance>("POST", "/api/instances", {
      challenge: challengeId,
    });
    assertNoFlagMaterial(payload, "instance");
    return payload;
  }

  async deleteInstance(instanceId: string): Promise<Instance> {
    const payload = await this.json<Instance>(
      "DELETE",
      `/api/instances/${encodeURIComponent(instanceId)}`,
    );
    assertNoFlagMaterial(payload, "instance");
    return payload;
  }

  async mySolves(): Promise<Solve[]> {
    const payload = await this.json<{ solves: Solve[] }>("GET", "/api/users/me/solves");
    assertNoFlagMaterial(payload, "solves");
    return payload.solves;
  }

  async categoryStats(): Promise<StatsRow[]> {
    const payload = await this.json<{ rows: StatsRow[] }>(
      "GET",
      "/api/stats/categories",
    );
    assertNoFlagMaterial(payload, "stats");
    return payload.rows;
  }
}
