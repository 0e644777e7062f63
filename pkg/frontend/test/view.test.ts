import { describe, expect, it } from "vitest";

import { initialState, UiConversationState } from "../src/state.js";
import { DISCLAIMER, renderLanguageSelector, renderTranscript } from "../src/view.js";

function stateWith(changes: Partial<UiConversationState>): UiConversationState {
  return { ...initialState(), ...changes };
}

describe("renderTranscript", () => {
  it("shows only the greeting bubble for an empty conversation", () => {
    const html = renderTranscript(stateWith({ greeting: "Hi, I'm Karabo" }));
    expect(html).toContain("Hi, I&#039;m Karabo".replace("&#039;", "'"));
    expect(html).toContain('class="bubble assistant greeting"');
    expect((html.match(/class="bubble/g) ?? []).length).toBe(1);
  });

  it("renders bubbles in chronological order with role classes", () => {
    const html = renderTranscript(
      stateWith({
        greeting: "Hi, I'm Karabo",
        messages: [
          { role: "user", text: "hello", timestamp: "t1" },
          { role: "assistant", text: "[MOCK]hello", timestamp: "t2" },
        ],
      })
    );
    const userAt = html.indexOf('class="bubble user"');
    const assistantAt = html.indexOf('class="bubble assistant"', userAt);
    expect(userAt).toBeGreaterThan(-1);
    expect(assistantAt).toBeGreaterThan(userAt);
    expect(html).toContain("[MOCK]hello");
  });

  it("places the safety banner above the assistant reply", () => {
    const html = renderTranscript(
      stateWith({
        messages: [
          { role: "user", text: "dark thoughts", timestamp: "t1" },
          { role: "assistant", text: "you are not alone", timestamp: "t2" },
        ],
        safetyNotice: "please call the helpline",
      })
    );
    const bannerAt = html.indexOf('class="banner safety"');
    const replyAt = html.indexOf("you are not alone");
    expect(bannerAt).toBeGreaterThan(-1);
    expect(bannerAt).toBeLessThan(replyAt);
  });

  it("always includes the disclaimer footer", () => {
    for (const state of [
      initialState(),
      stateWith({ messages: [{ role: "user", text: "x", timestamp: "t" }] }),
      stateWith({ errorBanner: "boom" }),
    ]) {
      expect(renderTranscript(state)).toContain(DISCLAIMER);
    }
  });

  it("marks failed bubbles and offers a retry button", () => {
    const html = renderTranscript(
      stateWith({
        messages: [{ role: "user", text: "lost", timestamp: "t", failed: true }],
        errorBanner: "message failed",
      })
    );
    expect(html).toContain("bubble user failed");
    expect(html).toContain('data-action="retry"');
  });

  it("shows a typing indicator while pending", () => {
    expect(renderTranscript(stateWith({ pending: true }))).toContain('class="typing"');
  });

  it("escapes markup in message text", () => {
    const html = renderTranscript(
      stateWith({ messages: [{ role: "user", text: "<script>", timestamp: "t" }] })
    );
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("renderLanguageSelector", () => {
  const languages = ["english", "setswana", "isizulu"];

  it("is enabled while the transcript holds only the greeting", () => {
    const html = renderLanguageSelector(stateWith({ greeting: "hello" }), languages);
    expect(html).not.toContain("disabled");
    expect(html).toContain('<option value="setswana"');
  });

  it("is disabled once messages exist", () => {
    const html = renderLanguageSelector(
      stateWith({ messages: [{ role: "user", text: "x", timestamp: "t" }] }),
      languages
    );
    expect(html).toContain("disabled");
  });

  it("marks the active language selected", () => {
    const html = renderLanguageSelector(stateWith({ language: "isizulu" }), languages);
    expect(html).toContain('value="isizulu" selected');
  });
});
