// Wire types for the review API (JSON over HTTP).

export interface ConversationLine {
  session: string;
  seq: number;
  speaker: string;
  text: string;
  masked_spans: [number, number][];
}

export interface ConversationDoc {
  conv_id: string;
  session_id: string;
  game: string;
  age_band: string;
  label: string;
  explanation: string;
  categories: string[];
  lines: ConversationLine[];
}

export interface SpanDoc {
  start: number;
  length: number;
  glyphs?: string;
  score?: number;
}

export interface TimelineMessage {
  session: string;
  seq: number;
  game: string;
  text: string;
  masked: boolean;
  spans: SpanDoc[];
}

export interface SaturationDoc {
  window: number;
  recent_novelty: boolean[];
  themes: string[];
  saturated: boolean;
  workflow?: string;
  pool_remaining?: number;
  pending?: string[];
}

export interface NextSampleDoc {
  workflow: string;
  exhausted: boolean;
  kind?: "conversation" | "user";
  target_id?: string;
  conversation?: ConversationDoc;
  timeline?: TimelineMessage[];
  saturation?: SaturationDoc;
}

export type Verdict = "tp" | "fp";

export interface AnnotationDraft {
  codes: string[];
  interpretable: boolean | null;
  verdict: Verdict | null;
}

export interface AnnotationOut {
  workflow: string;
  annotator: string;
  target: string;
  codes: string[];
  interpretable: boolean;
  verdict: Verdict | null;
}

export interface SubmitResponse {
  workflow: string;
  saturation: SaturationDoc;
}
