import type { ClusterPayload, PcaPoint } from "./types.js";

/** Simple orbit projection: rotate the PCA cloud by yaw/pitch, then drop
 * the depth axis. No renderer dependency, so the math is unit-testable. */
export interface ProjectedPoint {
  recordId: string;
  arcId: string;
  title: string;
  sx: number; // screen x in [0, 1]
  sy: number; // screen y in [0, 1]
  depth: number;
}

export function projectPoints(
  points: PcaPoint[],
  yaw: number,
  pitch: number,
): ProjectedPoint[] {
  if (points.length === 0) return [];
  const cosY = Math.cos(yaw), sinY = Math.sin(yaw);
  const cosP = Math.cos(pitch), sinP = Math.sin(pitch);
  const rotated = points.map((p) => {
    // Yaw about the vertical axis, then pitch about the horizontal axis.
    const x1 = p.x * cosY + p.z * sinY;
    const z1 = -p.x * sinY + p.z * cosY;
    const y1 = p.y * cosP - z1 * sinP;
    const z2 = p.y * sinP + z1 * cosP;
    return { p, x: x1, y: y1, z: z2 };
  });
  const spread = Math.max(
    1e-9,
    ...rotated.map((r) => Math.max(Math.abs(r.x), Math.abs(r.y))),
  );
  return rotated.map((r) => ({
    recordId: r.p.record_id,
    arcId: r.p.arc_id,
    title: r.p.title,
    sx: 0.5 + (r.x / spread) * 0.45,
    sy: 0.5 - (r.y / spread) * 0.45,
    depth: r.z,
  }));
}

const PALETTE = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
];

export function clusterColors(clusters: ClusterPayload): Map<string, string> {
  const colors = new Map<string, string>();
  for (const cluster of clusters.clusters) {
    const color = PALETTE[cluster.cluster_id % PALETTE.length] ?? "#888888";
    for (const member of cluster.member_ids) colors.set(member, color);
  }
  return colors;
}

export interface ExplorerState {
  points: PcaPoint[];
  clusters: ClusterPayload | null;
  yaw: number;
  pitch: number;
}

export function renderExplorer(
  canvas: HTMLCanvasElement,
  state: ExplorerState,
  hover?: { recordId: string } | null,
): ProjectedPoint[] {
  const projected = projectPoints(state.points, state.yaw, state.pitch);
  const colors = state.clusters ? clusterColors(state.clusters) : new Map<string, string>();
  const context = canvas.getContext("2d");
  if (context === null) return projected; // non-rendering environments still get geometry
  const { width, height } = canvas;
  context.clearRect(0, 0, width, height);
  const ordered = [...projected].sort((a, b) => a.depth - b.depth);
  for (const point of ordered) {
    const radius = point.recordId === hover?.recordId ? 8 : 5;
    context.beginPath();
    context.arc(point.sx * width, point.sy * height, radius, 0, Math.PI * 2);
    context.fillStyle = colors.get(point.recordId) ?? "#4e79a7";
    context.fill();
  }
  return projected;
}

export function nearestPoint(
  projected: ProjectedPoint[],
  sx: number,
  sy: number,
  maxDistance = 0.05,
): ProjectedPoint | null {
  let best: ProjectedPoint | null = null;
  let bestDistance = maxDistance;
  for (const point of projected) {
    const distance = Math.hypot(point.sx - sx, point.sy - sy);
    if (distance < bestDistance) {
      best = point;
      bestDistance = distance;
    }
  }
  return best;
}
