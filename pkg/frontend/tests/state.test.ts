import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Instance } from "../src/model.js";
import { ViewModel } from "../src/state.js";
import { challenge, instance, jsonResponse, stubFetch, STATS_ROWS } from "./fixtures.js";

function vmWith(route: Parameters<typeof stubFetch>[0], restored: Instance | null = null) {
  const fetchFn = stubFetch(route);
  return { vm: new ViewModel(new ApiClient("tok", "", fetchFn), restored), fetchFn };
}

function deferred<T>() {
  let resolve!: (value: T) => void;
  const promise = new Promise<T>((r) => (resolve = r));
  return { promise, resolve };
}

const errorBody = (code: string, status: number) =>
  jsonResponse({ code, message: `${code} happened` }, status);

describe("challenge browser", () => {
  it("walks empty -> loading -> ready", async () => {
    const gate = deferred<Response>();
    const { vm } = vmWith(() => gate.promise);
    expect(vm.state.challenges.phase).toBe("empty");
    const load = vm.loadChallenges();
    expect(vm.state.challenges.phase).toBe("loading");
    gate.resolve(jsonResponse({ challenges: [challenge()] }));
    await load;
    expect(vm.state.challenges.phase).toBe("ready");
    expect(vm.state.challenges.data).toHaveLength(1);
  });

  it("keeps an empty result distinct from no result", async () => {
    const { vm } = vmWith(() => jsonResponse({ challenges: [] }));
    await vm.loadChallenges({ event: "nope" });
    expect(vm.state.challenges.phase).toBe("ready");
    expect(vm.state.challenges.data).toEqual([]);
  });

  it("discards a stale response that lost the race", async () => {
    const gates: Array<{ promise: Promise<Response>; resolve: (r: Response) => void }> = [];
    const { vm } = vmWith(() => {
      const gate = deferred<Response>();
      gates.push(gate);
      return gate.promise;
    });
    const first = vm.loadChallenges({ category: "cryptography" });
    const second = vm.loadChallenges({ category: "web-exploitation" });
    gates[1].resolve(jsonResponse({ challenges: [challenge({ id: "web-1" })] }));
    await second;
    gates[0].resolve(jsonResponse({ challenges: [challenge({ id: "stale-1" })] }));
    await first;
    expect(vm.state.challenges.data?.map((c) => c.id)).toEqual(["web-1"]);
  });

  it("shows the error state and a connection banner when unreachable", async () => {
    const { vm } = vmWith(() => {
      throw new TypeError("fetch failed");
    });
    await vm.loadChallenges();
    expect(vm.state.challenges.phase).toBe("error");
    expect(vm.state.banner).toContain("cannot reach");
  });

  it("flags a rejected token so the shell can re-prompt", async () => {
    const { vm } = vmWith(() => errorBody("bad_request", 401));
    await vm.loadChallenges();
    expect(vm.state.authFailed).toBe(true);
  });
});

describe("submissions", () => {
  const detailRoute = (url: string) =>
    url.endsWith("/submit")
      ? jsonResponse({ verdict: "incorrect", first_solve: false, solved_before: false })
      : jsonResponse(challenge());

  it("keeps the typed input on a wrong answer", async () => {
    const { vm } = vmWith(detailRoute);
    await vm.select("rsa-intro");
    vm.setFlagInput("flag{typo}");
    await vm.submitFlag();
    expect(vm.state.submit.phase).toBe("incorrect");
    expect(vm.state.submit.input).toBe("flag{typo}");
    expect(vm.state.solved.has("rsa-intro")).toBe(false);
  });

  it("records the solve and the released platform flag when correct", async () => {
    const { vm } = vmWith((url) =>
      url.endsWith("/submit")
        ? jsonResponse({
            verdict: "correct",
            platform_flag: "vault{reward}",
            first_solve: true,
            solved_before: false,
          })
        : jsonResponse(challenge()),
    );
    await vm.select("rsa-intro");
    vm.setFlagInput("flag{right}");
    await vm.submitFlag();
    expect(vm.state.submit.phase).toBe("correct");
    expect(vm.state.submit.platformFlag).toBe("vault{reward}");
    expect(vm.state.submit.firstSolve).toBe(true);
    expect(vm.state.solved.has("rsa-intro")).toBe(true);
  });

  it("never marks a solve when the request dies mid-flight", async () => {
    const { vm } = vmWith((url) => {
      if (url.endsWith("/submit")) throw new TypeError("fetch failed");
      return jsonResponse(challenge());
    });
    await vm.select("rsa-intro");
    vm.setFlagInput("flag{right}");
    await vm.submitFlag();
    expect(vm.state.submit.phase).toBe("error");
    expect(vm.state.submit.input).toBe("flag{right}");
    expect(vm.state.solved.size).toBe(0);
    expect(vm.state.banner).not.toBeNull();
  });

  it("ignores empty input", async () => {
    const { vm, fetchFn } = vmWith(detailRoute);
    await vm.select("rsa-intro");
    await vm.submitFlag();
    expect(fetchFn.calls.filter((c) => c.method === "POST")).toHaveLength(0);
  });

  it("loads the solved set from the solves endpoint", async () => {
    const { vm } = vmWith(() =>
      jsonResponse({ solves: [{ challenge_id: "rsa-intro", timestamp: 1 }] }),
    );
    await vm.loadSolves();
    expect(vm.state.solved.has("rsa-intro")).toBe(true);
  });
});

describe("instance panel", () => {
  const withDetail = (onInstances: (init: RequestInit) => Response) => (url: string, init: RequestInit) =>
    url.startsWith("/api/instances") ? onInstances(init) : jsonResponse(challenge());

  it("holds the instance after a launch", async () => {
    const { vm } = vmWith(withDetail(() => jsonResponse(instance())));
    await vm.select("rsa-intro");
    await vm.launch();
    expect(vm.state.instance.active?.instance_id).toBe("inst-1");
    expect(vm.state.instance.pending).toBeNull();
    expect(vm.state.instance.error).toBeNull();
  });

  it("surfaces quota exhaustion without wedging the panel", async () => {
    const { vm } = vmWith(withDetail(() => errorBody("quota_exceeded", 409)));
    await vm.select("rsa-intro");
    await vm.launch();
    expect(vm.state.instance.error?.code).toBe("quota_exceeded");
    expect(vm.state.instance.pending).toBeNull();
  });

  it("surfaces driver failures with the machine code", async () => {
    const { vm } = vmWith(withDetail(() => errorBody("driver_failure", 502)));
    await vm.select("rsa-intro");
    await vm.launch();
    expect(vm.state.instance.error?.code).toBe("driver_failure");
  });

  it("drops a restored handle the server no longer knows", async () => {
    const { vm } = vmWith(
      withDetail(() => errorBody("not_found", 404)),
      instance({ instance_id: "stale" }),
    );
    await vm.stopInstance();
    expect(vm.state.instance.active).toBeNull();
    expect(vm.state.instance.error).toBeNull();
  });

  it("clears the instance after a stop", async () => {
    let stopped = false;
    const { vm } = vmWith(
      withDetail((init) => {
        if (init.method === "DELETE") {
          stopped = true;
          return jsonResponse(instance({ state: "stopped", endpoints: [] }));
        }
        return jsonResponse(instance());
      }),
    );
    await vm.select("rsa-intro");
    await vm.launch();
    await vm.stopInstance();
    expect(stopped).toBe(true);
    expect(vm.state.instance.active).toBeNull();
  });
});

describe("stats and retry", () => {
  it("mirrors the stats payload without recomputing", async () => {
    const { vm } = vmWith(() => jsonResponse({ rows: STATS_ROWS }));
    await vm.loadStats();
    expect(vm.state.stats.phase).toBe("ready");
    expect(vm.state.stats.data).toEqual(STATS_ROWS);
  });

  it("retry clears the banner and reloads what the view needs", async () => {
    let failing = true;
    const { vm } = vmWith((url) => {
      if (failing) throw new TypeError("fetch failed");
      if (url.startsWith("/api/users/me/solves")) return jsonResponse({ solves: [] });
      return jsonResponse({ challenges: [challenge()] });
    });
    await vm.loadChallenges();
    expect(vm.state.banner).not.toBeNull();
    failing = false;
    await vm.retry();
    expect(vm.state.banner).toBeNull();
    expect(vm.state.challenges.phase).toBe("ready");
  });
});
