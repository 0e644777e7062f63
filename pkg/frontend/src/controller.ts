import type { ApiClient } from "./api.js";
import {
  UiConversationState,
  conversationStarted,
  initialState,
  selectorEnabled,
} from "./state.js";

export type Listener = (state: UiConversationState) => void;

/**
 * Orchestrates the send loop: one in-flight request at a time, optimistic
 * user bubbles, and reconciliation with the server transcript after every
 * successful send.
 */
export class ChatController {
  state: UiConversationState = initialState();
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(changes: Partial<UiConversationState>): void {
    this.state = { ...this.state, ...changes };
    this.notify();
  }

  /** Create the initial conversation and show its greeting. */
  async init(language?: string): Promise<void> {
    await this.requestGreeting(language ?? this.state.language);
  }

  private async requestGreeting(language: string): Promise<void> {
    try {
      const result = await this.api.createConversation(language);
      this.patch({
        conversationId: result.id,
        language: result.language,
        greeting: result.greeting,
        warningToast: result.warning ?? null,
        errorBanner: null,
      });
    } catch (err) {
      this.patch({ errorBanner: `could not reach the service: ${String(err)}` });
    }
  }

  /**
   * Before the first message the selector re-requests the greeting in the
   * new language; afterwards it is disabled and selection is a no-op.
   */
  async selectLanguage(code: string): Promise<void> {
    if (!selectorEnabled(this.state)) return;
    await this.requestGreeting(code);
  }

  /** Single-flight send with an optimistic user bubble. */
  async sendMessage(text: string): Promise<void> {
    const trimmed = text.trim();
    if (trimmed.length === 0 || this.state.pending) return;
    const id = this.state.conversationId;
    if (id === null) return;

    this.patch({
      pending: true,
      errorBanner: null,
      safetyNotice: null,
      messages: [
        ...this.state.messages,
        { role: "user", text: trimmed, timestamp: new Date().toISOString() },
      ],
    });
    try {
      const reply = await this.api.sendMessage(id, trimmed);
      const transcript = await this.api.getTranscript(id);
      this.patch({
        pending: false,
        messages: transcript.messages,
        safetyNotice: reply.safety_notice ?? null,
      });
    } catch (err) {
      const messages = this.state.messages.map((m, i) =>
        i === this.state.messages.length - 1 ? { ...m, failed: true } : m
      );
      this.patch({
        pending: false,
        messages,
        errorBanner: `message failed: ${String(err)}`,
      });
    }
  }

  /** Retry affordance: resend the trailing failed bubble. */
  async retryFailed(): Promise<void> {
    const last = this.state.messages[this.state.messages.length - 1];
    if (!last || !last.failed || this.state.pending) return;
    this.patch({ messages: this.state.messages.slice(0, -1) });
    await this.sendMessage(last.text);
  }

  started(): boolean {
    return conversationStarted(this.state);
  }
}
