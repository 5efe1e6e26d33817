import type { Arc, TimelinePayload } from "./types.js";
import { episodeLabel } from "./types.js";

export interface TimelineCell {
  arcId: string;
  episode: string;
  summary: string; // first utterance, or empty for no progression
  utterances: string[];
  interfering: string[];
}

export interface TimelineRow {
  arc: Arc;
  cells: (TimelineCell | null)[];
}

export interface TimelineViewModel {
  columns: string[]; // episode labels in episode order
  rows: TimelineRow[];
}

/** Grid shape: rows are arcs, columns are the season's episodes in order.
 * Pure; filters are applied server-side and never mutate anything here. */
export function buildTimeline(payload: TimelinePayload): TimelineViewModel {
  const columns = [...payload.episodes];
  const rows = payload.arcs.map((arc) => {
    const byEpisode = new Map<string, TimelineCell>();
    for (const progression of arc.progressions) {
      const label = episodeLabel(progression.episode);
      byEpisode.set(label, {
        arcId: arc.arc_id,
        episode: label,
        summary: progression.content[0] ?? "",
        utterances: [...progression.content],
        interfering: [...progression.interfering_characters],
      });
    }
    return { arc, cells: columns.map((label) => byEpisode.get(label) ?? null) };
  });
  return { columns, rows };
}

export interface TimelineHandlers {
  onCellClick?: (cell: TimelineCell) => void;
  onArcClick?: (arc: Arc) => void;
}

export function renderTimeline(
  container: HTMLElement,
  model: TimelineViewModel,
  handlers: TimelineHandlers = {},
): void {
  container.textContent = "";
  if (model.rows.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No arcs in this season yet.";
    container.appendChild(empty);
    return;
  }

  const table = document.createElement("table");
  table.className = "timeline";

  const thead = document.createElement("thead");
  const head = document.createElement("tr");
  thead.appendChild(head);
  table.appendChild(thead);
  const corner = document.createElement("th");
  corner.textContent = "Arc";
  head.appendChild(corner);
  for (const column of model.columns) {
    const th = document.createElement("th");
    th.textContent = column;
    head.appendChild(th);
  }

  const body = document.createElement("tbody");
  table.appendChild(body);
  for (const row of model.rows) {
    const tr = document.createElement("tr");
    body.appendChild(tr);
    tr.dataset.arcId = row.arc.arc_id;
    const header = document.createElement("th");
    header.scope = "row";
    const link = document.createElement("a");
    link.href = "#";
    link.textContent = row.arc.title;
    link.addEventListener("click", (event) => {
      event.preventDefault();
      handlers.onArcClick?.(row.arc);
    });
    header.appendChild(link);
    const badge = document.createElement("span");
    badge.className = `type-badge type-${row.arc.arc_type}`;
    badge.textContent = row.arc.arc_type.replace("_", "-");
    header.appendChild(badge);
    tr.appendChild(header);

    for (const cell of row.cells) {
      const td = document.createElement("td");
      tr.appendChild(td);
      if (cell === null) {
        td.className = "cell empty";
        continue;
      }
      td.className = "cell filled";
      td.textContent = cell.summary;
      td.title = cell.utterances.join("\n");
      td.addEventListener("click", () => handlers.onCellClick?.(cell));
    }
  }
  container.appendChild(table);
}

export function renderProgressionDetail(container: HTMLElement, cell: TimelineCell): void {
  container.textContent = "";
  const heading = document.createElement("h3");
  heading.textContent = `Progression in ${cell.episode}`;
  container.appendChild(heading);
  const list = document.createElement("ol");
  list.className = "utterances";
  for (const utterance of cell.utterances) {
    const item = document.createElement("li");
    item.textContent = utterance;
    list.appendChild(item);
  }
  container.appendChild(list);
}
