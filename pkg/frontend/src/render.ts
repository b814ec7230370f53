/** Pure rendering: view-model state in, HTML strings out.
 *
 * No DOM reads, no network, no listeners; the shell owns event wiring
 * through data-action attributes. Keeping these functions pure lets the
 * panel snapshots run without a browser.
 */

import { Challenge, Instance, StatsRow } from "./model.js";
import { AppState, InstanceSlot, Panel, SubmitSlot } from "./state.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBanner(banner: string | null): string {
  if (banner === null) return "";
  return `<div class="banner" role="alert">
    <span>${esc(banner)}</span>
    <button data-action="retry">Retry</button>
  </div>`;
}

function solvedBadge(solved: boolean): string {
  return solved ? `<span class="badge solved">solved</span>` : "";
}

function challengeCard(c: Challenge, solved: boolean, selected: boolean): string {
  return `<li class="card${selected ? " selected" : ""}" data-action="select" data-id="${esc(c.id)}">
    <div class="card-head">
      <span class="card-title">${esc(c.title || c.id)}</span>
      ${solvedBadge(solved)}
    </div>
    <div class="card-meta">
      <span class="badge">${esc(c.category_label)}</span>
      <span>${esc(c.event)} ${c.year}</span>
      <span class="points">${c.points} pts</span>
    </div>
  </li>`;
}

export function renderChallengeList(
  panel: Panel<Challenge[]>,
  solved: ReadonlySet<string>,
  selectedId: string | null,
): string {
  switch (panel.phase) {
    case "empty":
      return `<p class="muted">Nothing loaded yet.</p>`;
    case "loading":
      return `<p class="muted">Loading challenges…</p>`;
    case "error":
      return `<div class="error-box">
        <p>${esc(panel.error ?? "load failed")}</p>
        <button data-action="retry">Retry</button>
      </div>`;
    case "ready": {
      const challenges = panel.data ?? [];
      if (challenges.length === 0) {
        return `<p class="muted empty-state">No challenges match.</p>`;
      }
      const cards = challenges
        .map((c) => challengeCard(c, solved.has(c.id), c.id === selectedId))
        .join("\n");
      return `<ul class="card-list">\n${cards}\n</ul>`;
    }
  }
}

export function renderFilters(state: AppState): string {
  const { event = "", year = "", category = "" } = state.filters;
  const seen = new Set<string>();
  for (const c of state.challenges.data ?? []) seen.add(c.category);
  const options = [...seen]
    .sort()
    .map((token) => `<option value="${esc(token)}"></option>`)
    .join("");
  return `<form class="filters" data-action="filter-form">
    <input id="filter-event" name="event" placeholder="event" value="${esc(event)}">
    <input id="filter-year" name="year" type="number" placeholder="year" value="${esc(year)}">
    <input id="filter-category" name="category" list="category-options"
           placeholder="category" value="${esc(category)}">
    <datalist id="category-options">${options}</datalist>
    <button type="submit">Filter</button>
    <button type="button" data-action="clear-filters">Clear</button>
  </form>`;
}

function runningInstance(instance: Instance): string {
  const endpoints = instance.endpoints
    .map(
      (e) => `<li>
        <span class="badge">${esc(e.kind)}</span>
        <code class="hint">${esc(e.hint)}</code>
        <button data-action="copy" data-text="${esc(e.hint)}">Copy</button>
      </li>`,
    )
    .join("\n");
  return `<div class="instance running">
    <p>Instance <code>${esc(instance.instance_id)}</code> is ${esc(instance.state)}.</p>
    <ul class="endpoints">${endpoints}</ul>
    <button data-action="stop">Stop</button>
  </div>`;
}

export function renderInstancePanel(slot: InstanceSlot, selectedId: string | null): string {
  const note = `<p class="muted note">Files under <code>${esc(
    slot.active?.workspace_mount ?? "/home/user",
  )}</code> persist across instance restarts.</p>`;

  let body: string;
  if (slot.pending === "launch") {
    body = `<p class="muted">Creating instance…</p>`;
  } else if (slot.pending === "stop") {
    body = `<p class="muted">Stopping…</p>`;
  } else if (slot.error !== null && slot.error.code === "quota_exceeded") {
    const holder = slot.active
      ? `<p>Your running instance belongs to
           <a href="#" data-action="select" data-id="${esc(slot.active.challenge_id)}">
           ${esc(slot.active.challenge_id)}</a>.</p>
         <button data-action="stop">Stop it</button>`
      : `<p>Stop your running instance first, then launch this one.</p>`;
    body = `<div class="warn-box">
      <p>${esc(slot.error.message)}</p>
      ${holder}
    </div>`;
  } else if (slot.error !== null) {
    body = `<div class="error-box">
      <p><code>${esc(slot.error.code)}</code> ${esc(slot.error.message)}</p>
      <button data-action="launch">Retry</button>
    </div>`;
  } else if (slot.active !== null && slot.active.challenge_id === selectedId) {
    body = runningInstance(slot.active);
  } else if (slot.active !== null) {
    body = `<div class="warn-box">
      <p>An instance for
        <a href="#" data-action="select" data-id="${esc(slot.active.challenge_id)}">
        ${esc(slot.active.challenge_id)}</a> is running; only one runs at a time.</p>
      <button data-action="stop">Stop it</button>
    </div>`;
  } else {
    body = `<button data-action="launch">Launch instance</button>`;
  }
  return `<section class="panel instance-panel">
    <h3>Instance</h3>
    ${body}
    ${note}
  </section>`;
}

export function renderSubmitPanel(slot: SubmitSlot, solved: boolean): string {
  let verdict = "";
  if (slot.phase === "correct") {
    verdict = `<div class="ok-box">
      <p>Correct!${slot.firstSolve ? " First solve recorded." : ""}</p>
      ${
        slot.platformFlag !== null
          ? `<p>Platform flag: <code class="platform-flag">${esc(slot.platformFlag)}</code></p>`
          : ""
      }
    </div>`;
  } else if (slot.phase === "incorrect") {
    verdict = `<div class="warn-box"><p>Incorrect flag; try again.</p></div>`;
  } else if (slot.phase === "error") {
    verdict = `<div class="error-box"><p>${esc(slot.error ?? "submission failed")}</p></div>`;
  }
  const pending = slot.phase === "pending";
  return `<section class="panel submit-panel">
    <h3>Submit flag ${solvedBadge(solved)}</h3>
    <form data-action="submit-form">
      <input id="flag-input" autocomplete="off" placeholder="flag{...}"
             value="${esc(slot.input)}" ${pending ? "disabled" : ""}>
      <button type="submit" ${pending ? "disabled" : ""}>${pending ? "Checking…" : "Submit"}</button>
    </form>
    ${verdict}
  </section>`;
}

export function renderDetail(state: AppState): string {
  const panel = state.detail;
  if (state.selectedId === null || panel.phase === "empty") {
    return `<p class="muted">Select a challenge.</p>`;
  }
  if (panel.phase === "loading") return `<p class="muted">Loading…</p>`;
  if (panel.phase === "error") {
    return `<div class="error-box">
      <p>${esc(panel.error ?? "load failed")}</p>
      <button data-action="retry">Retry</button>
    </div>`;
  }
  const c = panel.data as Challenge;
  const artifacts =
    c.artifacts.length === 0
      ? ""
      : `<h3>Files</h3><ul class="artifacts">${c.artifacts
          .map(
            (a) => `<li><a href="#" data-action="download" data-artifact="${esc(a)}">
              ${esc(a)}</a></li>`,
          )
          .join("\n")}</ul>`;
  const endpoints =
    c.endpoints.length === 0
      ? ""
      : `<p class="muted">Endpoints: ${c.endpoints
          .map((e) => `${esc(e.kind)}/${e.port}`)
          .join(", ")}</p>`;
  return `<article class="detail">
    <h2>${esc(c.title || c.id)} ${solvedBadge(state.solved.has(c.id))}</h2>
    <p class="card-meta">
      <span class="badge">${esc(c.category_label)}</span>
      <span>${esc(c.event)} ${c.year}</span>
      <span class="points">${c.points} pts</span>
    </p>
    ${c.description ? `<p>${esc(c.description)}</p>` : ""}
    ${endpoints}
    ${artifacts}
    ${renderInstancePanel(state.instance, state.selectedId)}
    ${renderSubmitPanel(state.submit, state.solved.has(c.id))}
  </article>`;
}

export function renderStats(panel: Panel<StatsRow[]>): string {
  switch (panel.phase) {
    case "empty":
      return `<p class="muted">Stats not loaded yet.</p>`;
    case "loading":
      return `<p class="muted">Loading stats…</p>`;
    case "error":
      return `<div class="error-box">
        <p>${esc(panel.error ?? "load failed")}</p>
        <button data-action="retry">Retry</button>
      </div>`;
    case "ready": {
      const rows = panel.data ?? [];
      if (rows.length === 0) return `<p class="muted empty-state">No stats.</p>`;
      // rows render in payload order, totals included, nothing recomputed
      const body = rows
        .map(
          (r) => `<tr class="${r.category === "Total" ? "total" : ""}">
            <td>${esc(r.category)}</td>
            <td class="num">${r.available}</td>
            <td class="num">${r.solves}</td>
          </tr>`,
        )
        .join("\n");
      return `<table class="stats">
        <thead><tr><th>Category</th><th>Available</th><th>Solves</th></tr></thead>
        <tbody>\n${body}\n</tbody>
      </table>`;
    }
  }
}

export function renderApp(state: AppState): string {
  const tab = (view: "browse" | "stats", label: string) =>
    `<button data-action="view-${view}" class="tab${state.view === view ? " on" : ""}">${label}</button>`;
  const main =
    state.view === "stats"
      ? `<section class="stats-view">${renderStats(state.stats)}</section>`
      : `<section class="browse">
          ${renderFilters(state)}
          <div class="columns">
            <div class="list-col">${renderChallengeList(
              state.challenges,
              state.solved,
              state.selectedId,
            )}</div>
            <div class="detail-col">${renderDetail(state)}</div>
          </div>
        </section>`;
  return `${renderBanner(state.banner)}
    <header>
      <h1>ctf-vault</h1>
      <nav>${tab("browse", "Challenges")}${tab("stats", "Stats")}</nav>
    </header>
    <main>${main}</main>`;
}
