import { describe, expect, it } from "vitest";

import { renderConversation, renderMaskedText, renderScreen, renderTimeline } from "../src/render.js";
import { emptyDraft, initialState } from "../src/state.js";
import type { ConversationDoc, NextSampleDoc, TimelineMessage } from "../src/types.js";

const CONV: ConversationDoc = {
  conv_id: "s1-c0000",
  session_id: "s1",
  game: "AdoptMe",
  age_band: "9+",
  label: "absolutely_unsafe",
  explanation: "grooming behavior",
  categories: ["grooming"],
  lines: [
    { session: "s1", seq: 0, speaker: "user_00001", text: "hello there", masked_spans: [] },
    { session: "s1", seq: 1, speaker: "user_00002", text: "#### gone now", masked_spans: [[0, 4]] },
  ],
};

describe("masked text rendering", () => {
  it("wraps each span in exactly one mark", () => {
    const html = renderMaskedText("a #### b ###", [
      [2, 4],
      [9, 3],
    ]);
    expect(html.match(/<mark class="masked">/g)).toHaveLength(2);
    expect(html).toContain('<mark class="masked">####</mark>');
    expect(html).toContain('<mark class="masked">###</mark>');
  });

  it("escapes html in and around spans", () => {
    const html = renderMaskedText("<b> ### <i>", [[4, 3]]);
    expect(html).not.toContain("<b>");
    expect(html).toContain("&lt;b&gt;");
  });

  it("renders spans one-to-one with the records given", () => {
    const doc = renderConversation(CONV);
    expect(doc.match(/<mark class="masked">/g)).toHaveLength(1);
  });
});

describe("screens", () => {
  it("conversation target renders every line", () => {
    const html = renderConversation(CONV);
    expect(html).toContain("user_00001");
    expect(html).toContain("hello there");
    expect(html).toContain("grooming");
  });

  it("timeline marks masked rows", () => {
    const messages: TimelineMessage[] = [
      { session: "r1", seq: 0, game: "AdoptMe", text: "#### x", masked: true, spans: [{ start: 0, length: 4 }] },
      { session: "r1", seq: 1, game: "AdoptMe", text: "clean", masked: false, spans: [] },
    ];
    const html = renderTimeline("user_00001", messages);
    expect(html.match(/has-mask/g)).toHaveLength(1);
    expect(html).toContain("2 messages, 1 masked");
  });

  it("exhausted state is a terminal screen", () => {
    const state = { ...initialState("rq1"), phase: "exhausted" as const };
    const html = renderScreen(state);
    expect(html).toContain("Pool exhausted");
    expect(html).not.toContain("submit");
  });

  it("error state offers retry", () => {
    const state = { ...initialState("rq1"), phase: "error" as const, message: "server unreachable" };
    const html = renderScreen(state);
    expect(html).toContain("server unreachable");
    expect(html).toContain('data-action="retry"');
  });

  it("review screen includes gauge, target and form", () => {
    const target: NextSampleDoc = {
      workflow: "rq1",
      exhausted: false,
      kind: "conversation",
      target_id: CONV.conv_id,
      conversation: CONV,
    };
    const state = {
      ...initialState("rq1"),
      phase: "review" as const,
      target,
      draft: emptyDraft(),
      saturation: { window: 5, recent_novelty: [], themes: [], saturated: false },
    };
    const html = renderScreen(state);
    expect(html).toContain('data-action="submit"');
    expect(html).toContain("s1-c0000");
    expect(html).toContain('aria-label="saturation"');
    expect(html).toContain('data-action="set-interpretable"');
  });
});
