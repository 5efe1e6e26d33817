/** Payload shapes of the curation API. */

export type ArcType = "anthology" | "soap" | "genre_specific";

export interface EpisodeRef {
  season: number;
  episode: number;
}

export interface Progression {
  progression_id: string;
  arc_id: string;
  series: string;
  episode: EpisodeRef;
  content: string[];
  interfering_characters: string[];
}

export interface Arc {
  arc_id: string;
  series: string;
  title: string;
  description: string;
  arc_type: ArcType;
  main_characters: string[];
  progressions: Progression[];
}

export interface TimelinePayload {
  series: string;
  season: number;
  episodes: string[];
  arcs: Arc[];
}

export interface Character {
  character_id: string;
  series: string;
  preferred_name: string;
  appellations: string[];
}

export interface DuplicatePair {
  a: { character_id: string; preferred_name: string };
  b: { character_id: string; preferred_name: string };
  score: number;
}

export interface PcaPoint {
  record_id: string;
  arc_id: string;
  title: string;
  x: number;
  y: number;
  z: number;
}

export interface ClusterPayload {
  threshold: number;
  clusters: {
    cluster_id: number;
    member_ids: string[];
    members: { record_id: string; arc_id: string; title: string }[];
  }[];
}

export interface Violation {
  code: string;
  message: string;
}

export interface RunEvent {
  event: string;
  agent?: string;
  episode?: string;
  error?: { code: string; message: string };
  [key: string]: unknown;
}

export function episodeLabel(ref: EpisodeRef): string {
  const pad = (n: number) => String(n).padStart(2, "0");
  return `S${pad(ref.season)}E${pad(ref.episode)}`;
}
