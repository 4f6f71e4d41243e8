// Shapes of the service API payloads the client consumes.  The UI never
// recomputes risk or actions: everything rendered comes from these bodies.

export type Material = "wood" | "steel" | "concrete";

export const MATERIALS: readonly Material[] = ["wood", "steel", "concrete"] as const;

export interface HangarProfile {
  near_sea: boolean;
  ac_installed: boolean;
  heating_installed: boolean;
  filters_installed: boolean;
  insulation_installed: boolean;
  barriers_installed: boolean;
  carpets_installed: boolean;
  walls_material: Material;
  roof_material: Material;
  floor_material: Material;
  walls_area: number;
  roof_area: number;
  floor_area: number;
  exhibition_area: number;
  volume: number;
}

export const FLAG_FIELDS = [
  "near_sea",
  "ac_installed",
  "heating_installed",
  "filters_installed",
  "insulation_installed",
  "barriers_installed",
  "carpets_installed",
] as const;

export const MATERIAL_FIELDS = ["walls_material", "roof_material", "floor_material"] as const;

export const AREA_FIELDS = [
  "walls_area",
  "roof_area",
  "floor_area",
  "exhibition_area",
  "volume",
] as const;

export type FlagField = (typeof FLAG_FIELDS)[number];
export type MaterialField = (typeof MATERIAL_FIELDS)[number];
export type AreaField = (typeof AREA_FIELDS)[number];
export type ProfileField = FlagField | MaterialField | AreaField;

export const PROFILE_FIELDS: readonly ProfileField[] = [
  ...FLAG_FIELDS,
  ...MATERIAL_FIELDS,
  ...AREA_FIELDS,
];

export type TimelinePoint = [string, number | null];

export interface Iso9223 {
  tow_class: number;
  so2_class: number;
  salinity_class: number;
  category: number;
  label: string;
}

export interface SnapshotFeatures {
  time_of_wetness_hours: number;
  time_of_wetness_annual_hours: number;
  freeze_thaw_events: number;
  freeze_thaw_events_annual: number;
  indoor_annual_means_ug_m3: Record<string, number>;
  rh_indoor_minus_outdoor: number;
}

export type DailyPoint = [string, number];

export interface Snapshot {
  format: string;
  window: { from: string; to: string; step_hours: number; grid_points: number; period_hours: number };
  ma_window_hours: number;
  ma_score_table: [number, number | null][] | null;
  profile: HangarProfile;
  features: SnapshotFeatures;
  iso9223: Iso9223;
  risk: { mean: number; max: number; timeline: TimelinePoint[] };
  pollution: {
    indoor_daily: Record<string, DailyPoint[]>;
    band_daily: Record<string, { low: DailyPoint[]; high: DailyPoint[] }>;
  };
  decision_input: Record<string, unknown>;
  actions: Record<string, string>;
  explanations: Record<string, string[]>;
  coercions: string[];
  generated_at: string;
  tree_fingerprint: string;
}

export interface RecommendationRow {
  action: string;
  title: string;
  output: string;
  highlight: boolean;
  explanations: string[];
}

export interface Recommendation {
  generated_at: string;
  input: Record<string, unknown>;
  actions: Record<string, string>;
  risk: { mean: number; max: number; iso9223: Iso9223 };
  explanations: Record<string, string[]>;
  coercions: string[];
  rows: RecommendationRow[];
  tree_fingerprint: string;
}

export interface IngestCounts {
  parsed: number;
  stored: number;
  failed: { line?: number; row?: number; error: string }[];
}

export interface ErrorBody {
  error: { kind: string; message: string; field?: string; missing?: string[] };
}

export interface EvaluateRequest {
  from: string;
  to: string;
  dry_run?: boolean;
  overrides?: { profile?: Partial<HangarProfile>; ma_window?: number | "search" };
}
