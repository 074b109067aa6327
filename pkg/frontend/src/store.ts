// UI state and transitions, free of DOM concerns so tests can drive it
// against a stubbed fetch. All rendering derives from server responses;
// the store never invents emotion data on its own.

import { ApiClient, ApiError, ModelInfo } from "./api.js";

export interface ChatMessage {
  role: "user" | "agent";
  text: string;
  emotion_coarse?: string;
  emotion_probs?: number[];
  timestamp: number;
}

export interface StoreState {
  messages: ChatMessage[];
  banner: string | null;
  busy: boolean;
  draft: string;
  override: string | null;
  sessionEnabled: boolean;
  sessionId: string | null;
  modelInfo: ModelInfo | null;
  infoError: string | null;
}

export type Listener = (state: StoreState) => void;

export class ChatStore {
  private state: StoreState = {
    messages: [],
    banner: null,
    busy: false,
    draft: "",
    override: null,
    sessionEnabled: false,
    sessionId: null,
    modelInfo: null,
    infoError: null,
  };
  private listeners: Listener[] = [];
  private lastTimestamp = 0;

  constructor(
    private readonly client: ApiClient,
    private readonly now: () => number = () => Date.now(),
  ) {}

  getState(): StoreState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<StoreState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Strictly increasing even when the clock is frozen. */
  private nextTimestamp(): number {
    this.lastTimestamp = Math.max(this.now(), this.lastTimestamp + 1);
    return this.lastTimestamp;
  }

  setDraft(text: string): void {
    this.update({ draft: text });
  }

  setOverride(label: string | null): void {
    if (label !== null) {
      const labels = this.state.modelInfo?.emotions ?? [];
      if (!labels.includes(label)) {
        this.update({ banner: `unknown emotion label: ${label}` });
        return;
      }
    }
    this.update({ override: label });
  }

  setSessionEnabled(enabled: boolean): void {
    this.update({
      sessionEnabled: enabled,
      sessionId: enabled
        ? this.state.sessionId ?? `ui-${this.nextTimestamp().toString(36)}`
        : null,
    });
  }

  async loadModelInfo(): Promise<void> {
    try {
      const info = await this.client.modelInfo();
      this.update({ modelInfo: info, infoError: null });
    } catch (err) {
      this.update({
        modelInfo: null,
        infoError: err instanceof ApiError ? err.message : String(err),
        override: null,
      });
    }
  }

  /**
   * POST the message and append the user + agent bubble pair.
   *
   * On failure nothing is appended: the banner shows the error and the
   * text stays in the draft box. One request is in flight at a time.
   */
  async sendMessage(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || this.state.busy) return;
    this.update({ busy: true, banner: null });
    try {
      const body: { text: string; session_id?: string; emotion_override?: string } = {
        text: trimmed,
      };
      if (this.state.sessionEnabled && this.state.sessionId) {
        body.session_id = this.state.sessionId;
      }
      if (this.state.override) {
        body.emotion_override = this.state.override;
      }
      const reply = await this.client.chat(body);
      const userMessage: ChatMessage = {
        role: "user",
        text: trimmed,
        emotion_coarse: reply.emotion_coarse,
        emotion_probs: reply.emotion_probs,
        timestamp: this.nextTimestamp(),
      };
      const agentMessage: ChatMessage = {
        role: "agent",
        text: reply.response,
        timestamp: this.nextTimestamp(),
      };
      this.update({
        messages: [...this.state.messages, userMessage, agentMessage],
        draft: "",
        busy: false,
      });
    } catch (err) {
      this.update({
        banner: err instanceof ApiError ? err.message : String(err),
        draft: text,
        busy: false,
      });
    }
  }
}

/** CSS width for one probability segment; proportional within rounding. */
export function probWidthPercent(p: number): string {
  const clamped = Math.min(Math.max(p, 0), 1);
  return `${(clamped * 100).toFixed(2)}%`;
}
