/** End-to-end: the real console DOM against the real API server, seeded by
 * replaying the bundled mini-season (see globalSetup). */

import { readFileSync } from "node:fs";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, inject, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { startApp } from "../src/main.js";

const baseUrl = inject("baseUrl");

// Every request the UI is allowed to make; anything else is a contract breach.
const DOCUMENTED_ENDPOINTS: [string, RegExp][] = [
  ["GET", /^\/api\/series$/],
  ["GET", /^\/api\/series\/[\w-]+\/seasons\/\d+\/arcs(\?.*)?$/],
  ["GET", /^\/api\/series\/[\w-]+\/characters$/],
  ["GET", /^\/api\/series\/[\w-]+\/characters\/duplicates(\?.*)?$/],
  ["GET", /^\/api\/series\/[\w-]+\/pca$/],
  ["GET", /^\/api\/series\/[\w-]+\/clusters(\?.*)?$/],
  ["GET", /^\/api\/arcs\/[\w-]+$/],
  ["POST", /^\/api\/arcs$/],
  ["PATCH", /^\/api\/arcs\/[\w-]+$/],
  ["DELETE", /^\/api\/arcs\/[\w-]+$/],
  ["POST", /^\/api\/arcs\/merge$/],
  ["POST", /^\/api\/arcs\/[\w-]+\/progressions$/],
  ["PATCH", /^\/api\/arcs\/[\w-]+\/progressions\/[\w#-]+$/],
  ["DELETE", /^\/api\/arcs\/[\w-]+\/progressions\/[\w#-]+$/],
  ["POST", /^\/api\/arcs\/[\w-]+\/progressions\/generate$/],
  ["PATCH", /^\/api\/characters\/[\w-]+$/],
  ["POST", /^\/api\/characters\/merge$/],
  ["POST", /^\/api\/pipeline\/run$/],
  ["GET", /^\/api\/pipeline\/runs\/[\w-]+$/],
  ["GET", /^\/api\/pipeline\/runs\/[\w-]+\/events$/],
];

const requests: { method: string; path: string }[] = [];
const realFetch = globalThis.fetch.bind(globalThis);

function recordingFetch(input: RequestInfo | URL, init?: RequestInit): Promise<Response> {
  const url = typeof input === "string" ? input : input instanceof URL ? input.href : input.url;
  const method = (init?.method ?? "GET").toUpperCase();
  if (url.startsWith(baseUrl)) {
    requests.push({ method, path: url.slice(baseUrl.length) });
  }
  return realFetch(input as RequestInfo, init);
}

function flush(): Promise<void> {
  // Let queued promise chains (fetch handlers, re-renders) settle.
  return new Promise((done) => setTimeout(done, 50));
}

function loadConsoleDom(): void {
  const html = readFileSync(resolve(__dirname, "..", "index.html"), "utf-8");
  const body = /<body>([\s\S]*)<\/body>/.exec(html)?.[1] ?? "";
  document.body.innerHTML = body.replace(/<script[\s\S]*?<\/script>/g, "");
}

function rowTitles(): string[] {
  return [...document.querySelectorAll<HTMLElement>("#timeline tbody tr th a")].map(
    (a) => a.textContent ?? "",
  );
}

const api = new ApiClient(baseUrl);
let lenaId = "";

beforeAll(async () => {
  globalThis.fetch = recordingFetch as typeof fetch;
  const { characters } = await api.characters("saltmarsh");
  lenaId = characters.find((c) => c.preferred_name === "Lena Vasquez")!.character_id;
  // Seed the near-duplicate soap arc the merge flow will collapse.
  await api.createArc({
    series: "saltmarsh",
    title: "Lena and Theo: Trust Rebuilt",
    description: "Lena Vasquez and Theo Marsh rebuild trust after the kayak rescue.",
    arc_type: "soap",
    main_characters: [lenaId],
    progressions: [
      { episode: { season: 1, episode: 1 }, content: ["Trust is rebuilt step by step."] },
    ],
  });
  loadConsoleDom();
  await startApp(baseUrl);
  await flush();
});

afterAll(() => {
  globalThis.fetch = realFetch;
});

describe("timeline", () => {
  it("renders the seeded season with correct row and column counts", () => {
    const columns = [...document.querySelectorAll("#timeline thead th")].slice(1);
    expect(columns.map((th) => th.textContent)).toEqual(["S01E01", "S01E02", "S01E03"]);
    // 5 extracted arcs + the seeded duplicate.
    expect(document.querySelectorAll("#timeline tbody tr")).toHaveLength(6);
  });

  it("cell click opens the progression detail", async () => {
    const cell = document.querySelector<HTMLElement>("#timeline td.cell.filled");
    cell?.click();
    await flush();
    expect(document.querySelector("#detail h3")?.textContent).toMatch(/Progression in S01E0\d/);
    expect(document.querySelectorAll("#detail li").length).toBeGreaterThan(0);
  });

  it("rejects an empty title edit with an inline EMPTY_TITLE message and no mutation", async () => {
    const link = [...document.querySelectorAll<HTMLAnchorElement>("#timeline tbody th a")].find(
      (a) => a.textContent === "Lena and Theo: Trust on the Line",
    )!;
    link.click();
    await flush();
    const editButton = [...document.querySelectorAll<HTMLButtonElement>("#detail button")].find(
      (b) => b.textContent === "Edit arc",
    )!;
    editButton.click();
    await flush();

    const dialog = document.querySelector<HTMLElement>(".arc-editor")!;
    dialog.querySelector<HTMLInputElement>('input[name="title"]')!.value = "  ";
    dialog.querySelector<HTMLButtonElement>('[data-action="save"]')!.click();
    await flush();

    expect(dialog.querySelector('[data-error-for="title"]')?.textContent).toContain("EMPTY_TITLE");
    const fresh = await api.timeline("saltmarsh", 1);
    expect(fresh.arcs.map((a) => a.title)).toContain("Lena and Theo: Trust on the Line");
    dialog.querySelector<HTMLButtonElement>('[data-action="cancel"]')!.click();
    await flush();
  });

  it("merging the seeded duplicate arcs through the dialog removes one row", async () => {
    const before = rowTitles();
    expect(before).toContain("Lena and Theo: Trust Rebuilt");

    // First selection is kept, second is absorbed.
    const keep = [...document.querySelectorAll<HTMLAnchorElement>("#timeline tbody th a")].find(
      (a) => a.textContent === "Lena and Theo: Trust on the Line",
    )!;
    keep.click();
    await flush();
    const absorb = [...document.querySelectorAll<HTMLAnchorElement>("#timeline tbody th a")].find(
      (a) => a.textContent === "Lena and Theo: Trust Rebuilt",
    )!;
    absorb.click();
    await flush();

    const mergeButton = [...document.querySelectorAll<HTMLButtonElement>("#detail button")].find(
      (b) => b.textContent?.startsWith("Compare and merge"),
    )!;
    mergeButton.click();
    await flush();

    const dialog = document.querySelector<HTMLElement>(".merge-dialog")!;
    expect(dialog.querySelector(".merge-side.keep")?.textContent).toContain("Trust on the Line");
    expect(dialog.querySelector(".merge-side.absorb")?.textContent).toContain("Trust Rebuilt");
    dialog.querySelector<HTMLButtonElement>('[data-action="confirm"]')!.click();
    await flush();
    await flush();

    const after = rowTitles();
    expect(after).toHaveLength(before.length - 1);
    expect(after).not.toContain("Lena and Theo: Trust Rebuilt");
  });
});

describe("characters", () => {
  it("shows the Frost duplicate suggestion and merges it successfully", async () => {
    document.querySelector<HTMLButtonElement>('[data-tab="characters"]')!.click();
    await flush();
    await flush();

    const suggestion = [...document.querySelectorAll<HTMLElement>(".duplicate-suggestions li")].find(
      (li) => li.textContent?.includes("Frost / Jerry Frost") || li.textContent?.includes("Jerry Frost / Frost"),
    );
    expect(suggestion, "Frost duplicate suggestion missing").toBeTruthy();

    suggestion!.querySelector("button")!.click();
    await flush();
    await flush();

    const remaining = [...document.querySelectorAll<HTMLElement>(".duplicate-suggestions li")];
    expect(remaining.some((li) => li.textContent?.includes("Jerry Frost /"))).toBe(false);
    const { characters } = await api.characters("saltmarsh");
    const names = characters.map((c) => c.preferred_name);
    expect(names).toContain("Jerry Frost");
    expect(names).not.toContain("Frost");
  });
});

describe("vector explorer", () => {
  it("renders one point per arc with cluster colors", async () => {
    document.querySelector<HTMLButtonElement>('[data-tab="explorer"]')!.click();
    await flush();
    await flush();

    const { arcs } = await api.timeline("saltmarsh", 1);
    const canvas = document.querySelector<HTMLCanvasElement>("#explorer-canvas")!;
    expect(Number(canvas.dataset.pointCount)).toBe(arcs.length);
    expect(document.querySelector("#explorer-count")?.textContent).toContain(`${arcs.length} points`);
  });

  it("threshold near zero puts every point in its own cluster", async () => {
    const slider = document.querySelector<HTMLInputElement>("#cluster-threshold")!;
    slider.value = "0.05";
    slider.dispatchEvent(new Event("change"));
    await flush();
    await flush();

    const clusters = await api.clusters("saltmarsh", 0.05);
    expect(clusters.clusters.every((c) => c.member_ids.length === 1)).toBe(true);
    expect(document.querySelector("#explorer-count")?.textContent).toContain(
      `${clusters.clusters.length} clusters`,
    );
  });
});

describe("auto-generated progressions", () => {
  it("shows drafted utterances for confirmation before anything saves", async () => {
    const { arcs } = await api.timeline("saltmarsh", 1);
    const soap = arcs.find((a) => a.title === "Lena and Theo: Trust on the Line")!;
    const progressionsBefore = soap.progressions.length;

    const { openGenerateDialog } = await import("../src/arcEditor.js");
    const dialog = await openGenerateDialog(document.body, {
      arc: soap,
      episode: { season: 1, episode: 3 },
      api,
      onSaved: () => undefined,
    });
    const drafted = [...dialog.querySelectorAll(".drafted li")].map((li) => li.textContent);
    expect(drafted.length).toBeGreaterThan(0);
    expect(drafted[0]).toContain("Lena Vasquez");

    dialog.querySelector<HTMLButtonElement>('[data-action="cancel"]')!.click();
    await flush();
    const fresh = await api.getArc(soap.arc_id);
    expect(fresh.progressions).toHaveLength(progressionsBefore); // nothing saved
  });
});

describe("network contract", () => {
  it("the UI only ever touched documented endpoints", () => {
    expect(requests.length).toBeGreaterThan(10);
    for (const request of requests) {
      const allowed = DOCUMENTED_ENDPOINTS.some(
        ([method, pattern]) => method === request.method && pattern.test(request.path),
      );
      expect(allowed, `undocumented request: ${request.method} ${request.path}`).toBe(true);
    }
  });
});
