import { ApiClient } from "./api.js";
import { openArcEditor, openMergeDialog } from "./arcEditor.js";
import {
  loadCharacterPanel,
  mergeCharactersWithFeedback,
  renderCharacterPanel,
} from "./characters.js";
import { nearestPoint, renderExplorer, type ExplorerState, type ProjectedPoint } from "./explorer.js";
import { applyRunEvent, newRunState, renderRunChecklist } from "./runs.js";
import { buildTimeline, renderProgressionDetail, renderTimeline } from "./timeline.js";
import type { Arc } from "./types.js";

interface AppState {
  series: string;
  season: number;
  typeFilter: string;
  characterFilter: string;
  mergeSelection: Arc[];
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

export async function startApp(baseUrl = ""): Promise<void> {
  const api = new ApiClient(baseUrl);
  const state: AppState = {
    series: "",
    season: 1,
    typeFilter: "",
    characterFilter: "",
    mergeSelection: [],
  };

  const seriesSelect = el<HTMLSelectElement>("series-select");
  const typeSelect = el<HTMLSelectElement>("type-filter");
  const characterSelect = el<HTMLSelectElement>("character-filter");
  const timelineContainer = el<HTMLElement>("timeline");
  const detailContainer = el<HTMLElement>("detail");
  const dialogRoot = el<HTMLElement>("dialog-root");
  const statusBar = el<HTMLElement>("status");

  const known = await api.listSeries();
  state.series = known.series[0] ?? "";
  seriesSelect.textContent = "";
  for (const name of known.series) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name;
    seriesSelect.appendChild(option);
  }

  async function refreshCharacterFilter(): Promise<void> {
    const { characters } = await api.characters(state.series);
    characterSelect.textContent = "";
    const any = document.createElement("option");
    any.value = "";
    any.textContent = "any character";
    characterSelect.appendChild(any);
    for (const character of characters) {
      const option = document.createElement("option");
      option.value = character.character_id;
      option.textContent = character.preferred_name;
      characterSelect.appendChild(option);
    }
  }

  async function refreshTimeline(): Promise<void> {
    const payload = await api.timeline(state.series, state.season, {
      type: state.typeFilter || undefined,
      character: state.characterFilter || undefined,
    });
    const model = buildTimeline(payload);
    renderTimeline(timelineContainer, model, {
      onCellClick: (cell) => renderProgressionDetail(detailContainer, cell),
      onArcClick: (arc) => selectArc(arc),
    });
    statusBar.textContent = `${model.rows.length} arcs × ${model.columns.length} episodes`;
  }

  function selectArc(arc: Arc): void {
    state.mergeSelection = [...state.mergeSelection, arc].slice(-2);
    detailContainer.textContent = "";
    const heading = document.createElement("h3");
    heading.textContent = arc.title;
    detailContainer.appendChild(heading);
    const description = document.createElement("p");
    description.textContent = `[${arc.arc_type}] ${arc.description}`;
    detailContainer.appendChild(description);

    const editButton = document.createElement("button");
    editButton.type = "button";
    editButton.textContent = "Edit arc";
    editButton.addEventListener("click", () =>
      openArcEditor(dialogRoot, { arc, api, onSaved: () => void refreshTimeline() }),
    );
    detailContainer.appendChild(editButton);

    if (state.mergeSelection.length === 2) {
      const [keep, absorb] = state.mergeSelection as [Arc, Arc];
      const mergeButton = document.createElement("button");
      mergeButton.type = "button";
      mergeButton.textContent = `Compare and merge with "${keep.title}"`;
      mergeButton.addEventListener("click", () =>
        openMergeDialog(dialogRoot, {
          keep,
          absorb,
          api,
          onMerged: () => {
            state.mergeSelection = [];
            void refreshTimeline();
          },
        }),
      );
      detailContainer.appendChild(mergeButton);
    }
  }

  // -- explorer tab ------------------------------------------------------------

  const canvas = el<HTMLCanvasElement>("explorer-canvas");
  const thresholdSlider = el<HTMLInputElement>("cluster-threshold");
  const thresholdValue = el<HTMLElement>("cluster-threshold-value");
  const pointCount = el<HTMLElement>("explorer-count");
  const hoverLabel = el<HTMLElement>("explorer-hover");
  const explorer: ExplorerState = { points: [], clusters: null, yaw: 0.6, pitch: 0.4 };
  let projected: ProjectedPoint[] = [];

  async function refreshExplorer(): Promise<void> {
    const [pca, clusters] = await Promise.all([
      api.pca(state.series),
      api.clusters(state.series, Number(thresholdSlider.value)),
    ]);
    explorer.points = pca.points;
    explorer.clusters = clusters;
    thresholdValue.textContent = Number(thresholdSlider.value).toFixed(2);
    projected = renderExplorer(canvas, explorer);
    pointCount.textContent = `${projected.length} points in ${clusters.clusters.length} clusters`;
    canvas.dataset.pointCount = String(projected.length);
  }

  thresholdSlider.addEventListener("change", () => void refreshExplorer());
  canvas.addEventListener("mousemove", (event) => {
    const bounds = canvas.getBoundingClientRect();
    const sx = (event.clientX - bounds.left) / bounds.width;
    const sy = (event.clientY - bounds.top) / bounds.height;
    const hit = nearestPoint(projected, sx, sy);
    hoverLabel.textContent = hit ? hit.title : "";
    projected = renderExplorer(canvas, explorer, hit ? { recordId: hit.recordId } : null);
  });
  canvas.addEventListener("mousedown", (down) => {
    const startYaw = explorer.yaw, startPitch = explorer.pitch;
    const move = (event: MouseEvent) => {
      explorer.yaw = startYaw + (event.clientX - down.clientX) * 0.01;
      explorer.pitch = startPitch + (event.clientY - down.clientY) * 0.01;
      projected = renderExplorer(canvas, explorer);
    };
    const up = () => {
      window.removeEventListener("mousemove", move);
      window.removeEventListener("mouseup", up);
    };
    window.addEventListener("mousemove", move);
    window.addEventListener("mouseup", up);
  });

  // -- character tab ------------------------------------------------------------

  const characterContainer = el<HTMLElement>("characters");

  async function refreshCharacters(): Promise<void> {
    const panel = await loadCharacterPanel(api, state.series);
    renderCharacterPanel(characterContainer, panel, {
      onMerge: async (keepId, dropId) => {
        const merged = await mergeCharactersWithFeedback(api, characterContainer, keepId, dropId);
        if (merged !== null) {
          await Promise.all([refreshCharacters(), refreshCharacterFilter(), refreshTimeline()]);
        }
      },
    });
  }

  // -- pipeline tab ----------------------------------------------------------------

  const runButton = el<HTMLButtonElement>("start-run");
  const runContainer = el<HTMLElement>("run-progress");
  runButton.addEventListener("click", async () => {
    runButton.disabled = true;
    try {
      const { run_id } = await api.startRun(state.series, state.season, "replay");
      const runState = newRunState();
      await api.streamRunEvents(run_id, (event) => {
        applyRunEvent(runState, event);
        renderRunChecklist(runContainer, runState);
      });
      await Promise.all([refreshTimeline(), refreshExplorer(), refreshCharacters()]);
    } finally {
      runButton.disabled = false;
    }
  });

  // -- shell ---------------------------------------------------------------------

  for (const button of document.querySelectorAll<HTMLButtonElement>("[data-tab]")) {
    button.addEventListener("click", () => {
      for (const section of document.querySelectorAll<HTMLElement>("[data-panel]")) {
        section.hidden = section.dataset.panel !== button.dataset.tab;
      }
      if (button.dataset.tab === "explorer") void refreshExplorer();
      if (button.dataset.tab === "characters") void refreshCharacters();
    });
  }

  seriesSelect.addEventListener("change", async () => {
    state.series = seriesSelect.value;
    await Promise.all([refreshCharacterFilter(), refreshTimeline()]);
  });
  typeSelect.addEventListener("change", () => {
    state.typeFilter = typeSelect.value;
    void refreshTimeline();
  });
  characterSelect.addEventListener("change", () => {
    state.characterFilter = characterSelect.value;
    void refreshTimeline();
  });

  if (state.series) {
    await refreshCharacterFilter();
    await refreshTimeline();
  }
}

declare global {
  interface Window {
    arcmemStart?: typeof startApp;
  }
}

if (typeof window !== "undefined") {
  window.arcmemStart = startApp;
  if (document.getElementById("timeline") !== null && !window.location.href.startsWith("about:")) {
    void startApp();
  }
}
