/** Browser shell: owns the DOM, session storage, and event wiring.
 *
 * All logic lives in the view model; this layer only re-renders on
 * change events and translates data-action clicks into actions. The
 * auth token and the active-instance handle survive reloads in session
 * storage (the solved badges do not need to: they come from the solves
 * endpoint every boot).
 */

import { ApiClient } from "./api.js";
import { Instance } from "./model.js";
import { renderApp, esc } from "./render.js";
import { ViewModel } from "./state.js";

const TOKEN_KEY = "ctf-vault.token";
const INSTANCE_KEY = "ctf-vault.instance";

function readStoredInstance(storage: Storage): Instance | null {
  const raw = storage.getItem(INSTANCE_KEY);
  if (raw === null) return null;
  try {
    return JSON.parse(raw) as Instance;
  } catch {
    storage.removeItem(INSTANCE_KEY);
    return null;
  }
}

export class AppShell {
  private vm: ViewModel | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly storage: Storage,
  ) {}

  start(): void {
    this.bindEvents();
    const token = this.storage.getItem(TOKEN_KEY);
    if (token === null) {
      this.renderTokenGate();
    } else {
      this.boot(token);
    }
  }

  private boot(token: string): void {
    const api = new ApiClient(token);
    const vm = new ViewModel(api, readStoredInstance(this.storage));
    this.vm = vm;
    vm.onChange(() => this.render());
    void vm.loadChallenges();
    void vm.loadSolves();
  }

  private render(): void {
    const vm = this.vm;
    if (vm === null) return;
    if (vm.state.authFailed) {
      // token rejected: forget it and fall back to the gate
      this.storage.removeItem(TOKEN_KEY);
      this.vm = null;
      this.renderTokenGate("That token was rejected; enter a new one.");
      return;
    }
    this.storage.setItem(INSTANCE_KEY, JSON.stringify(vm.state.instance.active));
    if (vm.state.instance.active === null) this.storage.removeItem(INSTANCE_KEY);
    this.root.innerHTML = renderApp(vm.state);
  }

  private renderTokenGate(notice = ""): string | void {
    this.root.innerHTML = `
      ${notice ? `<div class="banner" role="alert"><span>${esc(notice)}</span></div>` : ""}
      <header><h1>ctf-vault</h1></header>
      <main>
        <form class="panel token-gate" data-action="token-form">
          <h3>Access token</h3>
          <input id="token-input" type="password" autocomplete="off" placeholder="token">
          <button type="submit">Enter</button>
        </form>
      </main>`;
  }

  private bindEvents(): void {
    this.root.addEventListener("click", (ev) => this.onClick(ev));
    this.root.addEventListener("submit", (ev) => this.onSubmit(ev));
    this.root.addEventListener("input", (ev) => {
      const target = ev.target as HTMLInputElement;
      // silent mirror: re-rendering per keystroke would reset the caret
      if (target.id === "flag-input") this.vm?.setFlagInput(target.value);
    });
  }

  private onClick(ev: Event): void {
    const el = (ev.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (el === null || el.dataset.action === undefined) return;
    const action = el.dataset.action;
    if (action.endsWith("-form")) return; // handled by onSubmit
    ev.preventDefault();
    const vm = this.vm;
    if (vm === null) return;
    switch (action) {
      case "select":
        void vm.select(el.dataset.id ?? null);
        break;
      case "launch":
        void vm.launch();
        break;
      case "stop":
        void vm.stopInstance();
        break;
      case "retry":
        void vm.retry();
        break;
      case "view-browse":
        vm.setView("browse");
        break;
      case "view-stats":
        vm.setView("stats");
        void vm.loadStats();
        break;
      case "clear-filters":
        void vm.loadChallenges({});
        break;
      case "copy":
        void navigator.clipboard?.writeText(el.dataset.text ?? "");
        break;
      case "download":
        void this.download(el.dataset.artifact ?? "");
        break;
      default:
        break;
    }
  }

  private onSubmit(ev: Event): void {
    ev.preventDefault();
    const form = ev.target as HTMLElement;
    const action = form.dataset.action;
    if (action === "token-form") {
      const input = this.root.querySelector<HTMLInputElement>("#token-input");
      const token = input?.value.trim() ?? "";
      if (token === "") return;
      this.storage.setItem(TOKEN_KEY, token);
      this.boot(token);
      return;
    }
    const vm = this.vm;
    if (vm === null) return;
    if (action === "filter-form") {
      const value = (id: string) =>
        this.root.querySelector<HTMLInputElement>(`#${id}`)?.value.trim() ?? "";
      void vm.loadChallenges({
        event: value("filter-event"),
        year: value("filter-year"),
        category: value("filter-category"),
      });
    } else if (action === "submit-form") {
      const input = this.root.querySelector<HTMLInputElement>("#flag-input");
      vm.setFlagInput(input?.value ?? "");
      void vm.submitFlag();
    }
  }

  private async download(artifact: string): Promise<void> {
    const vm = this.vm;
    if (vm === null || vm.state.selectedId === null || artifact === "") return;
    const api = new ApiClient(this.storage.getItem(TOKEN_KEY) ?? "");
    // authenticated fetch: a plain <a href> cannot carry the bearer token
    const bytes = await api.fetchArtifact(vm.state.selectedId, artifact);
    const url = URL.createObjectURL(new Blob([bytes]));
    const a = document.createElement("a");
    a.href = url;
    a.download = artifact.split("/").pop() ?? artifact;
    a.click();
    URL.revokeObjectURL(url);
  }
}
