import type { TranscriptMessage } from "./api.js";

export interface UiMessage extends TranscriptMessage {
  failed?: boolean;
}

export interface UiConversationState {
  conversationId: string | null;
  language: string;
  greeting: string | null;
  // Mirrors the server transcript after every successful call; the greeting
  // is a separate welcome element and never part of this list.
  messages: UiMessage[];
  pending: boolean;
  errorBanner: string | null;
  warningToast: string | null;
  safetyNotice: string | null;
}

export const DEFAULT_LANGUAGE = "english";

export function initialState(): UiConversationState {
  return {
    conversationId: null,
    language: DEFAULT_LANGUAGE,
    greeting: null,
    messages: [],
    pending: false,
    errorBanner: null,
    warningToast: null,
    safetyNotice: null,
  };
}

/** A conversation has started once any real message exists. */
export function conversationStarted(state: UiConversationState): boolean {
  return state.messages.length > 0;
}

/** The selector stays enabled only while the transcript is just the greeting. */
export function selectorEnabled(state: UiConversationState): boolean {
  return !conversationStarted(state) && !state.pending;
}

export function canSend(state: UiConversationState, draft: string): boolean {
  return !state.pending && draft.trim().length > 0 && state.conversationId !== null;
}
