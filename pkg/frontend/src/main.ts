import { httpClient } from "./api.js";
import { ChatController } from "./controller.js";
import { canSend } from "./state.js";
import { renderLanguageSelector, renderTranscript } from "./view.js";

const LANGUAGES = ["english", "setswana", "isizulu"];

declare global {
  interface Window {
    KARABO_API_BASE?: string;
  }
}

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

export function bootstrap(): void {
  const base = window.KARABO_API_BASE ?? "http://127.0.0.1:8000";
  const controller = new ChatController(httpClient(base));

  const transcript = requireElement<HTMLDivElement>("transcript");
  const selectorHost = requireElement<HTMLDivElement>("selector");
  const input = requireElement<HTMLInputElement>("draft");
  const sendButton = requireElement<HTMLButtonElement>("send");

  controller.subscribe((state) => {
    transcript.innerHTML = renderTranscript(state);
    selectorHost.innerHTML = renderLanguageSelector(state, LANGUAGES);
    sendButton.disabled = !canSend(state, input.value);
    transcript.scrollTop = transcript.scrollHeight;

    const selector = selectorHost.querySelector<HTMLSelectElement>("#language");
    selector?.addEventListener("change", () => {
      void controller.selectLanguage(selector.value);
    });
    transcript.querySelector<HTMLButtonElement>(".retry")?.addEventListener("click", () => {
      void controller.retryFailed();
    });
  });

  const submit = () => {
    const text = input.value;
    if (!canSend(controller.state, text)) return;
    input.value = "";
    void controller.sendMessage(text);
  };
  sendButton.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") submit();
  });
  input.addEventListener("input", () => {
    sendButton.disabled = !canSend(controller.state, input.value);
  });

  void controller.init();
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  bootstrap();
}
