// Typed client for the chat server's HTTP API. The fetch implementation is
// injectable so tests can replay recorded responses.

export interface ModelInfo {
  vocab_size: number;
  d_model: number;
  n_heads: number;
  emotions: string[];
}

export interface ChatRequest {
  text: string;
  session_id?: string;
  emotion_override?: string;
}

export interface ChatResponse {
  emotion_coarse: string;
  emotion_probs: number[];
  response: string;
  token_count: number;
  latency_ms: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every((v) => typeof v === "string");
}

function isNumberArray(value: unknown): value is number[] {
  return Array.isArray(value) && value.every((v) => typeof v === "number" && isFinite(v));
}

export function parseModelInfo(payload: unknown): ModelInfo {
  const p = payload as Partial<ModelInfo> | null;
  if (
    !p || typeof p !== "object" ||
    typeof p.vocab_size !== "number" ||
    typeof p.d_model !== "number" ||
    typeof p.n_heads !== "number" ||
    !isStringArray(p.emotions) ||
    p.emotions.length !== 8
  ) {
    throw new ApiError("malformed model-info payload");
  }
  return p as ModelInfo;
}

export function parseChatResponse(payload: unknown): ChatResponse {
  const p = payload as Partial<ChatResponse> | null;
  if (
    !p || typeof p !== "object" ||
    typeof p.emotion_coarse !== "string" ||
    !isNumberArray(p.emotion_probs) ||
    p.emotion_probs.length !== 8 ||
    typeof p.response !== "string" ||
    typeof p.token_count !== "number" ||
    typeof p.latency_ms !== "number"
  ) {
    throw new ApiError("malformed chat payload");
  }
  const sum = p.emotion_probs.reduce((a, b) => a + b, 0);
  if (Math.abs(sum - 1) > 1e-3) {
    throw new ApiError(`emotion probabilities sum to ${sum.toFixed(4)}, expected 1`);
  }
  return p as ChatResponse;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.url(path), init);
    } catch (err) {
      throw new ApiError(`cannot reach server: ${String(err)}`);
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      // non-JSON body; fall through to the status check
    }
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(detail, response.status);
    }
    return payload;
  }

  async health(): Promise<boolean> {
    const payload = (await this.request("/health")) as { status?: string } | null;
    return payload?.status === "ok";
  }

  async modelInfo(): Promise<ModelInfo> {
    return parseModelInfo(await this.request("/model-info"));
  }

  async chat(body: ChatRequest): Promise<ChatResponse> {
    return parseChatResponse(
      await this.request("/chat", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }
}
