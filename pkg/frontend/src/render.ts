/** Pure HTML renderers: every view is a function of the API payload alone, so
 * a rendered item can never contain more than the server chose to reveal. */

import type { Dimension, Progress, SessionItem } from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

const QUESTIONS: Record<Dimension, string> = {
  validity: "Which label fits this text?",
  suspiciousness: "Is this text human-written or computer-altered?",
  detectability: "Which candidate is least likely to have been altered by a computer?",
  grammaticality: "Which candidate is the most grammatically correct and fluent?",
  meaning: "Which candidate best preserves the meaning of the original?",
};

/** One selectable answer; `value` is the JSON the controller submits. */
export interface ChoiceButton {
  key: string;
  caption: string;
  value: string;
}

export function choicesFor(item: SessionItem, dimension: Dimension): ChoiceButton[] {
  if (item.mode === "validity") {
    return item.labels.map((label, i) => ({
      key: String(i + 1),
      caption: label,
      value: JSON.stringify({ label: i }),
    }));
  }
  if (item.mode === "suspiciousness") {
    return [
      { key: "1", caption: "human-written", value: JSON.stringify({ computer_altered: false }) },
      { key: "2", caption: "computer-altered", value: JSON.stringify({ computer_altered: true }) },
    ];
  }
  return item.candidates.map((candidate, i) => ({
    key: String(i + 1),
    caption: `candidate ${candidate.slot}`,
    value: JSON.stringify({ slot: candidate.slot }),
  }));
}

function renderChoices(choices: ChoiceButton[]): string {
  const buttons = choices
    .map(
      (c) =>
        `<button class="choice" data-value="${escapeHtml(c.value)}">` +
        `<kbd>${escapeHtml(c.key)}</kbd> ${escapeHtml(c.caption)}</button>`,
    )
    .join("\n");
  return `<div class="choices">\n${buttons}\n</div>`;
}

export function renderProgress(progress: Progress): string {
  return `<div class="progress">${progress.judged} / ${progress.total} judgments</div>`;
}

export function renderItem(item: SessionItem, dimension: Dimension): string {
  const parts: string[] = [];
  parts.push(`<h2 class="question">${escapeHtml(QUESTIONS[dimension])}</h2>`);
  if (item.mode === "dgm") {
    parts.push(
      `<blockquote class="original"><strong>original</strong> ` +
        `${escapeHtml(item.original)}</blockquote>`,
    );
    for (const candidate of item.candidates) {
      parts.push(
        `<blockquote class="candidate"><strong>${escapeHtml(candidate.slot)}</strong> ` +
          `${escapeHtml(candidate.text)}</blockquote>`,
      );
    }
  } else {
    parts.push(`<blockquote class="text">${escapeHtml(item.text)}</blockquote>`);
  }
  parts.push(renderChoices(choicesFor(item, dimension)));
  parts.push(renderProgress(item.progress));
  return `<section class="item" data-item-id="${escapeHtml(item.item_id)}" data-dimension="${escapeHtml(dimension)}">\n${parts.join("\n")}\n</section>`;
}

export function renderDone(progress: Progress): string {
  return (
    `<section class="done"><h2>Session complete</h2>` +
    `${renderProgress(progress)}</section>`
  );
}

export function renderError(message: string): string {
  return `<div class="error" role="alert">${escapeHtml(message)}</div>`;
}

export function renderLogin(): string {
  return (
    `<section class="login"><h2>Evaluator sign-in</h2>` +
    `<label>Evaluator id <input id="evaluator" autofocus></label>` +
    `<label>API base URL <input id="api-base" value="http://127.0.0.1:8100"></label>` +
    `<button id="start">Start session</button></section>`
  );
}
