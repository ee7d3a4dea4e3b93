// HTML renderers. Pure string builders so every screen is assertable in
// node tests; the browser shell just assigns innerHTML and delegates events
// through data-action attributes.

import { gaugeModel, paletteFor, type ScreenState } from "./state.js";
import type { ConversationDoc, SpanDoc, TimelineMessage } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

// Wrap each masked span in a <mark>; offsets refer to the raw text, so the
// text is escaped segment by segment.
export function renderMaskedText(text: string, spans: [number, number][]): string {
  const ordered = [...spans].sort((a, b) => a[0] - b[0]);
  let cursor = 0;
  let html = "";
  for (const [start, length] of ordered) {
    if (start < cursor) continue; // defensive: overlapping spans never render twice
    html += escapeHtml(text.slice(cursor, start));
    html += `<mark class="masked">${escapeHtml(text.slice(start, start + length))}</mark>`;
    cursor = start + length;
  }
  html += escapeHtml(text.slice(cursor));
  return html;
}

function spanPairs(spans: SpanDoc[]): [number, number][] {
  return spans.map((s) => [s.start, s.length]);
}

export function renderConversation(conv: ConversationDoc): string {
  const rows = conv.lines
    .map(
      (line) =>
        `<li class="line${line.masked_spans.length ? " has-mask" : ""}">` +
        `<span class="speaker">${escapeHtml(line.speaker)}</span>` +
        `<span class="text">${renderMaskedText(line.text, line.masked_spans)}</span></li>`,
    )
    .join("");
  const categories = conv.categories.map((c) => `<span class="chip">${escapeHtml(c)}</span>`).join("");
  return (
    `<section class="conversation" data-target="${escapeHtml(conv.conv_id)}">` +
    `<header><h2>${escapeHtml(conv.conv_id)}</h2>` +
    `<p>${escapeHtml(conv.game)} · ${escapeHtml(conv.age_band)} · ${escapeHtml(conv.label)}</p>` +
    `<p class="explanation">${escapeHtml(conv.explanation)}</p>${categories}</header>` +
    `<ol class="lines">${rows}</ol></section>`
  );
}

export function renderTimeline(pseudonym: string, messages: TimelineMessage[]): string {
  const rows = messages
    .map(
      (m) =>
        `<li class="line${m.masked ? " has-mask" : ""}">` +
        `<span class="meta">${escapeHtml(m.session)}#${m.seq} · ${escapeHtml(m.game)}</span>` +
        `<span class="text">${renderMaskedText(m.text, spanPairs(m.spans))}</span></li>`,
    )
    .join("");
  return (
    `<section class="timeline" data-target="${escapeHtml(pseudonym)}">` +
    `<header><h2>${escapeHtml(pseudonym)}</h2>` +
    `<p>${messages.length} messages, ${messages.filter((m) => m.masked).length} masked</p></header>` +
    `<ol class="lines">${rows}</ol></section>`
  );
}

export function renderGauge(state: ScreenState): string {
  if (!state.saturation) return `<div class="gauge" aria-label="saturation"></div>`;
  const model = gaugeModel(state.saturation);
  const slots = model.slots
    .map((s) => `<span class="slot ${s}"></span>`)
    .join("");
  const closed = model.closed
    ? `<p class="closed">Category closed: no new patterns for ${model.window} interpretable candidates.</p>`
    : "";
  return (
    `<div class="gauge${model.closed ? " saturated" : ""}" aria-label="saturation">` +
    `<span class="count">${model.themeCount} themes</span>${slots}${closed}</div>`
  );
}

export function renderForm(state: ScreenState): string {
  const draft = state.draft;
  const palette = paletteFor(state)
    .map(
      (code) =>
        `<button type="button" data-action="toggle-code" data-code="${escapeHtml(code)}"` +
        ` class="code${draft.codes.includes(code) ? " on" : ""}">${escapeHtml(code)}</button>`,
    )
    .join("");
  const problems = state.problems.map((p) => `<li class="problem">${escapeHtml(p)}</li>`).join("");
  const verdictRow =
    state.workflow === "rq1"
      ? `<div class="row verdict">` +
        `<button type="button" data-action="set-verdict" data-verdict="tp" class="${draft.verdict === "tp" ? "on" : ""}">true positive</button>` +
        `<button type="button" data-action="set-verdict" data-verdict="fp" class="${draft.verdict === "fp" ? "on" : ""}">false positive</button></div>`
      : "";
  return (
    `<form class="annotation" data-action-form="submit">` +
    `<div class="row palette">${palette}</div>` +
    `<div class="row free"><input name="free-code" data-role="free-code" placeholder="new code"/>` +
    `<button type="button" data-action="add-code">add</button></div>` +
    verdictRow +
    `<div class="row interpretable">` +
    `<button type="button" data-action="set-interpretable" data-value="yes" class="${draft.interpretable === true ? "on" : ""}">interpretable</button>` +
    `<button type="button" data-action="set-interpretable" data-value="no" class="${draft.interpretable === false ? "on" : ""}">not interpretable</button></div>` +
    `<ul class="problems">${problems}</ul>` +
    `<button type="button" data-action="submit" class="submit">submit</button></form>`
  );
}

export function renderScreen(state: ScreenState): string {
  if (state.phase === "loading") {
    return `<main class="screen loading"><p>loading…</p></main>`;
  }
  if (state.phase === "error") {
    return (
      `<main class="screen error"><p class="banner">${escapeHtml(state.message)}</p>` +
      `<button type="button" data-action="retry">retry</button></main>`
    );
  }
  if (state.phase === "exhausted") {
    return (
      `<main class="screen exhausted"><h2>Pool exhausted</h2>` +
      `<p>Every candidate in this workflow has been drawn.</p>${renderGauge(state)}</main>`
    );
  }
  const target = state.target;
  let body = "";
  if (target?.kind === "conversation" && target.conversation) {
    body = renderConversation(target.conversation);
  } else if (target?.kind === "user" && target.timeline && target.target_id) {
    body = renderTimeline(target.target_id, target.timeline);
  }
  return `<main class="screen review">${renderGauge(state)}${body}${renderForm(state)}</main>`;
}
