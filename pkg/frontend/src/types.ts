export interface Breakdown {
  pose_sim: number;
  context_sim: number;
  weighted_sim: number;
  alpha: number;
}

export interface SlotDoc {
  slot_index: number;
  image: string;
  content_hash: string;
  pose_caption: string;
  context_caption: string;
  ego_motion_to_next: string | null;
  breakdown: Breakdown | null;
}

export interface StoryboardDoc {
  id: string;
  kind: "reference" | "generated" | "curated";
  status: "draft" | "approved";
  reference_storyboard_id: string | null;
  input_video_id: string | null;
  config_digest: string | null;
  ego_motion_policy: string;
  slots: SlotDoc[];
  edit_history: Array<{ kind: string; a: number; b: number }>;
  version: number;
  alignment_id: string | null;
}

export interface StoryboardSummary {
  id: string;
  kind: string;
  status: string;
  slot_count: number;
  reference_storyboard_id: string | null;
  input_video_id: string | null;
  version: number;
  alignment_id: string | null;
}

export interface CandidateDoc {
  frame_index: number;
  breakdown: Breakdown;
}

export interface CandidateEntry {
  frame_index: number;
  content_hash: string | null;
  breakdown: Breakdown;
}

export interface AlignmentSlotDoc {
  slot_index: number;
  chosen_frame_index: number;
  breakdown: Breakdown;
  candidates: CandidateDoc[];
}

export interface AlignmentDoc {
  storyboard_id: string;
  video_id: string;
  config: {
    alpha: number;
    strategy: "greedy" | "monotone";
    top_k: number;
    allow_frame_reuse: boolean;
  };
  total_score: number;
  slots: AlignmentSlotDoc[];
}

export interface AlignmentEnvelope {
  alignment_id: string;
  alignment: AlignmentDoc;
  storyboard: StoryboardSummary | null;
}

export interface ExportResult {
  manifest: string;
  html: string;
}

export type EditKind = "swap_slots" | "replace_frame" | "approve";

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}
