// Thin client over the service's /api endpoints. The fetch function is
// injectable so component tests can run against an in-memory server.

export type Role = "user" | "assistant";

export interface TranscriptMessage {
  role: Role;
  text: string;
  timestamp: string;
}

export interface CreateConversationResult {
  id: string;
  greeting: string;
  language: string;
  warning?: string;
}

export interface SendMessageResult {
  assistant_text: string;
  safety_notice?: string;
}

export interface Transcript {
  id: string;
  language_pref: string;
  messages: TranscriptMessage[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ApiClient {
  createConversation(language: string): Promise<CreateConversationResult>;
  sendMessage(id: string, text: string): Promise<SendMessageResult>;
  getTranscript(id: string): Promise<Transcript>;
}

async function parseJson(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const message = body?.error?.message ?? `HTTP ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return body;
}

export function httpClient(baseUrl: string, fetchFn?: FetchLike): ApiClient {
  const doFetch: FetchLike = fetchFn ?? ((input, init) => fetch(input, init));
  const base = baseUrl.replace(/\/$/, "");
  const post = (path: string, payload: unknown) =>
    doFetch(`${base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });

  return {
    async createConversation(language: string) {
      return parseJson(await post("/api/conversations", { language }));
    },
    async sendMessage(id: string, text: string) {
      return parseJson(await post(`/api/conversations/${id}/messages`, { text }));
    },
    async getTranscript(id: string) {
      return parseJson(await doFetch(`${base}/api/conversations/${id}`));
    },
  };
}
