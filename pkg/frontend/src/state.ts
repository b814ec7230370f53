/** View model: all UI state and the actions that drive it.
 *
 * No DOM access here. The render layer draws whatever this holds, and
 * every state is reachable purely from API responses, so the whole thing
 * runs (and is tested) without a browser. Stale responses are discarded
 * by per-panel sequence numbers.
 */

import { ApiClient, ApiError, ConnectionError, Filters } from "./api.js";
import { Challenge, Instance, StatsRow } from "./model.js";

export type Phase = "empty" | "loading" | "error" | "ready";

export interface Panel<T> {
  phase: Phase;
  data: T | null;
  error: string | null;
}

function emptyPanel<T>(): Panel<T> {
  return { phase: "empty", data: null, error: null };
}

export interface InstanceSlot {
  /** op in flight; cleared in finally so a failure never wedges the panel */
  pending: "launch" | "stop" | null;
  /** the user's single instance, if this client knows about it */
  active: Instance | null;
  error: { code: string; message: string } | null;
}

export interface SubmitSlot {
  input: string;
  phase: "idle" | "pending" | "correct" | "incorrect" | "error";
  platformFlag: string | null;
  firstSolve: boolean;
  error: string | null;
}

export interface AppState {
  view: "browse" | "stats";
  filters: Filters;
  challenges: Panel<Challenge[]>;
  selectedId: string | null;
  detail: Panel<Challenge>;
  instance: InstanceSlot;
  submit: SubmitSlot;
  solved: ReadonlySet<string>;
  stats: Panel<StatsRow[]>;
  /** connection-failure banner; null when the service is reachable */
  banner: string | null;
  /** token rejected; the shell drops back to the token gate */
  authFailed: boolean;
}

function freshSubmit(): SubmitSlot {
  return { input: "", phase: "idle", platformFlag: null, firstSolve: false, error: null };
}

export class ViewModel {
  readonly state: AppState;
  private listeners: Array<() => void> = [];
  private seq = { challenges: 0, detail: 0, stats: 0 };

  constructor(
    private readonly api: ApiClient,
    restoredInstance: Instance | null = null,
  ) {
    this.state = {
      view: "browse",
      filters: {},
      challenges: emptyPanel(),
      selectedId: null,
      detail: emptyPanel(),
      instance: { pending: null, active: restoredInstance, error: null },
      submit: freshSubmit(),
      solved: new Set(),
      stats: emptyPanel(),
      banner: null,
      authFailed: false,
    };
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  /** Route a failure to the right surface; returns the message to show. */
  private noteFailure(err: unknown): string {
    if (err instanceof ConnectionError) {
      this.state.banner = err.message;
      return err.message;
    }
    if (err instanceof ApiError) {
      if (err.status === 401) this.state.authFailed = true;
      return `${err.code}: ${err.message}`;
    }
    throw err; // programming error; do not swallow
  }

  // -- challenge browser --

  async loadChallenges(filters?: Filters): Promise<void> {
    if (filters !== undefined) this.state.filters = filters;
    const ticket = ++this.seq.challenges;
    this.state.challenges = { phase: "loading", data: this.state.challenges.data, error: null };
    this.emit();
    try {
      const challenges = await this.api.listChallenges(this.state.filters);
      if (ticket !== this.seq.challenges) return; // superseded by a newer filter
      this.state.banner = null;
      this.state.challenges = { phase: "ready", data: challenges, error: null };
    } catch (err) {
      if (ticket !== this.seq.challenges) return;
      const message = this.noteFailure(err);
      this.state.challenges = { phase: "error", data: null, error: message };
    }
    this.emit();
  }

  async select(id: string | null): Promise<void> {
    this.state.selectedId = id;
    this.state.submit = freshSubmit();
    this.state.instance.error = null;
    if (id === null) {
      this.state.detail = emptyPanel();
      this.emit();
      return;
    }
    const ticket = ++this.seq.detail;
    this.state.detail = { phase: "loading", data: null, error: null };
    this.emit();
    try {
      const detail = await this.api.getChallenge(id);
      if (ticket !== this.seq.detail) return;
      this.state.banner = null;
      this.state.detail = { phase: "ready", data: detail, error: null };
    } catch (err) {
      if (ticket !== this.seq.detail) return;
      const message = this.noteFailure(err);
      this.state.detail = { phase: "error", data: null, error: message };
    }
    this.emit();
  }

  // -- submissions --

  setFlagInput(text: string): void {
    // no emit: the input element owns the caret while the user types,
    // and a re-render per keystroke would reset it
    this.state.submit.input = text;
  }

  async submitFlag(): Promise<void> {
    const id = this.state.selectedId;
    if (id === null || this.state.submit.phase === "pending") return;
    if (!this.state.submit.input) return; // nothing to submit
    this.state.submit.phase = "pending";
    this.state.submit.error = null;
    this.emit();
    try {
      const result = await this.api.submitFlag(id, this.state.submit.input);
      if (result.verdict === "correct") {
        this.state.submit.phase = "correct";
        this.state.submit.platformFlag = result.platform_flag ?? null;
        this.state.submit.firstSolve = result.first_solve;
        this.state.solved = new Set(this.state.solved).add(id);
      } else {
        // wrong answer: keep the input so the user can fix a typo
        this.state.submit.phase = "incorrect";
      }
    } catch (err) {
      // a failed request never marks anything solved
      this.state.submit.phase = "error";
      this.state.submit.error = this.noteFailure(err);
    }
    this.emit();
  }

  async loadSolves(): Promise<void> {
    try {
      const solves = await this.api.mySolves();
      this.state.banner = null;
      this.state.solved = new Set(solves.map((s) => s.challenge_id));
    } catch (err) {
      this.noteFailure(err);
    }
    this.emit();
  }

  // -- instances --

  async launch(): Promise<void> {
    const id = this.state.selectedId;
    if (id === null || this.state.instance.pending !== null) return;
    this.state.instance.pending = "launch";
    this.state.instance.error = null;
    this.emit();
    try {
      this.state.instance.active = await this.api.createInstance(id);
      this.state.banner = null;
    } catch (err) {
      const message = this.noteFailure(err);
      const code = err instanceof ApiError ? err.code : "connection";
      this.state.instance.error = { code, message };
    } finally {
      this.state.instance.pending = null;
    }
    this.emit();
  }

  async stopInstance(): Promise<void> {
    const active = this.state.instance.active;
    if (active === null || this.state.instance.pending !== null) return;
    this.state.instance.pending = "stop";
    this.state.instance.error = null;
    this.emit();
    try {
      await this.api.deleteInstance(active.instance_id);
      this.state.instance.active = null;
      this.state.banner = null;
    } catch (err) {
      const message = this.noteFailure(err);
      const code = err instanceof ApiError ? err.code : "connection";
      if (code === "not_found") {
        // the server no longer knows this instance (restart, expiry);
        // a restored handle from session storage can go stale this way
        this.state.instance.active = null;
      } else {
        this.state.instance.error = { code, message };
      }
    } finally {
      this.state.instance.pending = null;
    }
    this.emit();
  }

  // -- stats --

  async loadStats(): Promise<void> {
    const ticket = ++this.seq.stats;
    this.state.stats = { phase: "loading", data: this.state.stats.data, error: null };
    this.emit();
    try {
      const rows = await this.api.categoryStats();
      if (ticket !== this.seq.stats) return;
      this.state.banner = null;
      this.state.stats = { phase: "ready", data: rows, error: null };
    } catch (err) {
      if (ticket !== this.seq.stats) return;
      const message = this.noteFailure(err);
      this.state.stats = { phase: "error", data: null, error: message };
    }
    this.emit();
  }

  // -- shell --

  setView(view: "browse" | "stats"): void {
    this.state.view = view;
    this.emit();
  }

  /** Banner retry: reload everything the current view depends on. */
  async retry(): Promise<void> {
    this.state.banner = null;
    this.emit();
    const work: Array<Promise<void>> = [this.loadChallenges(), this.loadSolves()];
    if (this.state.selectedId !== null) work.push(this.select(this.state.selectedId));
    if (this.state.view === "stats") work.push(this.loadStats());
    await Promise.all(work);
  }
}
