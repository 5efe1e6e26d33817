import type { RunEvent } from "./types.js";

const AGENTS = ["agent1", "agent2", "agent3", "agent4", "agent5", "agent6", "agent7", "agent8", "agent9"];

export interface RunChecklistState {
  episodes: Map<string, Set<string>>; // episode -> completed agents
  failed: string | null;
  completed: boolean;
}

export function newRunState(): RunChecklistState {
  return { episodes: new Map(), failed: null, completed: false };
}

export function applyRunEvent(state: RunChecklistState, event: RunEvent): RunChecklistState {
  if (event.event === "agent_completed" && event.episode && event.agent) {
    const done = state.episodes.get(event.episode) ?? new Set<string>();
    done.add(event.agent);
    state.episodes.set(event.episode, done);
  } else if (event.event === "run_failed") {
    state.failed = event.error ? `${event.error.code}: ${event.error.message}` : "run failed";
  } else if (event.event === "run_completed") {
    state.completed = true;
  }
  return state;
}

/** Per-agent checklist, one row per episode. */
export function renderRunChecklist(container: HTMLElement, state: RunChecklistState): void {
  container.textContent = "";
  const table = document.createElement("table");
  table.className = "run-checklist";
  const thead = document.createElement("thead");
  const head = document.createElement("tr");
  thead.appendChild(head);
  table.appendChild(thead);
  head.appendChild(document.createElement("th")).textContent = "Episode";
  for (const agent of AGENTS) {
    const th = document.createElement("th");
    th.textContent = agent.replace("agent", "A");
    head.appendChild(th);
  }
  const body = document.createElement("tbody");
  table.appendChild(body);
  for (const [episode, done] of [...state.episodes.entries()].sort()) {
    const row = document.createElement("tr");
    body.appendChild(row);
    const label = document.createElement("th");
    label.scope = "row";
    label.textContent = episode;
    row.appendChild(label);
    for (const agent of AGENTS) {
      const cell = document.createElement("td");
      row.appendChild(cell);
      cell.textContent = done.has(agent) ? "✓" : "·";
      cell.className = done.has(agent) ? "done" : "pending";
    }
  }
  container.appendChild(table);

  if (state.failed) {
    const failure = document.createElement("p");
    failure.className = "field-error";
    failure.textContent = state.failed;
    container.appendChild(failure);
  } else if (state.completed) {
    const success = document.createElement("p");
    success.className = "run-completed";
    success.textContent = "Run completed.";
    container.appendChild(success);
  }
}
