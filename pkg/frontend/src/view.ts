import type { UiConversationState } from "./state.js";
import { selectorEnabled } from "./state.js";

export const DISCLAIMER =
  "Karabo offers supportive conversation and is not a substitute for " +
  "professional mental-health care.";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function bubble(role: string, text: string, extraClass = ""): string {
  return `<div class="bubble ${role}${extraClass ? " " + extraClass : ""}">${escapeHtml(text)}</div>`;
}

/**
 * Chronological transcript: greeting bubble first, then real messages.
 * A safety notice renders as a banner directly above the reply it came
 * with, and the non-clinical disclaimer footer is always present.
 */
export function renderTranscript(state: UiConversationState): string {
  const parts: string[] = [];
  if (state.warningToast) {
    parts.push(`<div class="toast warning">${escapeHtml(state.warningToast)}</div>`);
  }
  if (state.errorBanner) {
    parts.push(
      `<div class="banner error">${escapeHtml(state.errorBanner)}` +
        `<button class="retry" data-action="retry">retry</button></div>`
    );
  }
  if (state.greeting) {
    parts.push(bubble("assistant", state.greeting, "greeting"));
  }
  const lastAssistant = state.messages.map((m) => m.role).lastIndexOf("assistant");
  state.messages.forEach((message, index) => {
    if (state.safetyNotice && index === lastAssistant) {
      parts.push(`<div class="banner safety">${escapeHtml(state.safetyNotice)}</div>`);
    }
    parts.push(bubble(message.role, message.text, message.failed ? "failed" : ""));
  });
  if (state.pending) {
    parts.push(`<div class="typing" aria-label="Karabo is typing">…</div>`);
  }
  parts.push(`<footer class="disclaimer">${escapeHtml(DISCLAIMER)}</footer>`);
  return parts.join("\n");
}

export function renderLanguageSelector(
  state: UiConversationState,
  languages: string[]
): string {
  const disabled = selectorEnabled(state) ? "" : " disabled";
  const options = languages
    .map(
      (code) =>
        `<option value="${escapeHtml(code)}"${code === state.language ? " selected" : ""}>` +
        `${escapeHtml(code)}</option>`
    )
    .join("");
  return `<select id="language"${disabled}>${options}</select>`;
}
