// Screen state and the pure rules behind it: draft validation and the
// saturation gauge model. Kept DOM-free so the whole review loop is
// scriptable in tests.

import type { AnnotationDraft, NextSampleDoc, SaturationDoc, Verdict } from "./types.js";

// Palette seeds: unsafe-content categories plus the known evasion techniques.
// Free-text codes extend these at runtime (open coding needs emergent codes).
export const CATEGORY_CODES = [
  "grooming",
  "sexual_content",
  "bullying",
  "harassment",
  "profanity",
  "off_platform",
  "threats_violence",
  "hate_speech",
  "self_harm",
  "request_for_pii",
];

export const EVASION_CODES = [
  "multi_line_fragmentation",
  "lexical_retry",
  "altered_spelling",
  "code_word",
  "leet_speak",
  "probing",
];

export type Phase = "loading" | "review" | "exhausted" | "error";

export interface ScreenState {
  workflow: string;
  phase: Phase;
  target: NextSampleDoc | null;
  draft: AnnotationDraft;
  saturation: SaturationDoc | null;
  extraCodes: string[];
  problems: string[];
  message: string;
}

export function emptyDraft(): AnnotationDraft {
  return { codes: [], interpretable: null, verdict: null };
}

export function initialState(workflow: string): ScreenState {
  return {
    workflow,
    phase: "loading",
    target: null,
    draft: emptyDraft(),
    saturation: null,
    extraCodes: [],
    problems: [],
    message: "",
  };
}

export function paletteFor(state: ScreenState): string[] {
  const base = state.workflow === "rq2" ? EVASION_CODES : CATEGORY_CODES;
  return [...base, ...state.extraCodes];
}

// Submission rules: at least one code or an explicit false-positive verdict,
// and the interpretability toggle must have been answered either way.
export function validateDraft(draft: AnnotationDraft): string[] {
  const problems: string[] = [];
  if (draft.codes.length === 0 && draft.verdict !== "fp") {
    problems.push("apply at least one code or mark the target as a false positive");
  }
  if (draft.interpretable === null) {
    problems.push("say whether the target had interpretable context");
  }
  return problems;
}

export function toggleCode(draft: AnnotationDraft, code: string): AnnotationDraft {
  const codes = draft.codes.includes(code)
    ? draft.codes.filter((c) => c !== code)
    : [...draft.codes, code];
  return { ...draft, codes };
}

export function setInterpretable(draft: AnnotationDraft, value: boolean): AnnotationDraft {
  return { ...draft, interpretable: value };
}

export function setVerdict(draft: AnnotationDraft, verdict: Verdict | null): AnnotationDraft {
  return { ...draft, verdict };
}

export interface GaugeModel {
  window: number;
  filled: number; // consecutive non-novel entries counting back from the end
  slots: ("stale" | "empty")[];
  themeCount: number;
  closed: boolean;
}

export function gaugeModel(saturation: SaturationDoc): GaugeModel {
  let run = 0;
  for (let i = saturation.recent_novelty.length - 1; i >= 0; i--) {
    if (saturation.recent_novelty[i]) break;
    run += 1;
  }
  const filled = Math.min(run, saturation.window);
  const slots: ("stale" | "empty")[] = [];
  for (let i = 0; i < saturation.window; i++) {
    slots.push(i < filled ? "stale" : "empty");
  }
  return {
    window: saturation.window,
    filled,
    slots,
    themeCount: saturation.themes.length,
    closed: saturation.saturated,
  };
}
