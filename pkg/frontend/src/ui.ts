// DOM rendering for the chat store. Everything shown comes from the
// server's responses via the store state.

import { ChatMessage, ChatStore, StoreState, probWidthPercent } from "./store.js";

const EMOTION_HUES = [45, 265, 90, 10, 150, 210, 320, 180]; // one hue per label index

function badgeColor(label: string, labels: string[]): string {
  const idx = Math.max(labels.indexOf(label), 0);
  return `hsl(${EMOTION_HUES[idx % EMOTION_HUES.length]} 70% 45%)`;
}

function renderProbBar(probs: number[], labels: string[]): HTMLElement {
  const bar = document.createElement("div");
  bar.className = "prob-bar";
  probs.forEach((p, i) => {
    const seg = document.createElement("span");
    seg.className = "prob-seg";
    seg.style.width = probWidthPercent(p);
    seg.style.background = badgeColor(labels[i] ?? "", labels);
    seg.title = `${labels[i] ?? `#${i}`}: ${(p * 100).toFixed(1)}%`;
    bar.appendChild(seg);
  });
  return bar;
}

function renderMessage(message: ChatMessage, labels: string[]): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = `bubble-row ${message.role}`;
  const bubble = document.createElement("div");
  bubble.className = "bubble";

  if (message.role === "user" && message.emotion_coarse) {
    const badge = document.createElement("span");
    badge.className = "emotion-badge";
    badge.textContent = message.emotion_coarse;
    badge.style.background = badgeColor(message.emotion_coarse, labels);
    bubble.appendChild(badge);
  }

  const text = document.createElement("p");
  text.textContent = message.text;
  bubble.appendChild(text);

  if (message.role === "user" && message.emotion_probs) {
    bubble.appendChild(renderProbBar(message.emotion_probs, labels));
  }
  wrap.appendChild(bubble);
  return wrap;
}

interface Elements {
  timeline: HTMLElement;
  banner: HTMLElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  selector: HTMLSelectElement;
  session: HTMLInputElement;
  headerInfo: HTMLElement;
}

function grab(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

export function mountChatUi(store: ChatStore): void {
  const els: Elements = {
    timeline: grab("timeline"),
    banner: grab("banner"),
    input: grab("message-input") as HTMLInputElement,
    send: grab("send-button") as HTMLButtonElement,
    selector: grab("emotion-select") as HTMLSelectElement,
    session: grab("session-toggle") as HTMLInputElement,
    headerInfo: grab("model-info"),
  };

  els.send.addEventListener("click", () => void store.sendMessage(els.input.value));
  els.input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void store.sendMessage(els.input.value);
  });
  els.input.addEventListener("input", () => store.setDraft(els.input.value));
  els.selector.addEventListener("change", () => {
    store.setOverride(els.selector.value === "auto" ? null : els.selector.value);
  });
  els.session.addEventListener("change", () => store.setSessionEnabled(els.session.checked));

  store.subscribe((state) => render(state, els));
}

function render(state: StoreState, els: Elements): void {
  const labels = state.modelInfo?.emotions ?? [];

  els.headerInfo.textContent = state.modelInfo
    ? `vocab ${state.modelInfo.vocab_size} · d_model ${state.modelInfo.d_model} · ` +
      `${state.modelInfo.n_heads} heads`
    : "model info unavailable";

  // selector: "auto" plus exactly the served labels
  const wanted = ["auto", ...labels];
  const current = Array.from(els.selector.options).map((o) => o.value);
  if (wanted.join("|") !== current.join("|")) {
    els.selector.replaceChildren(
      ...wanted.map((label) => {
        const opt = document.createElement("option");
        opt.value = label;
        opt.textContent = label === "auto" ? "emotion: auto" : label;
        return opt;
      }),
    );
  }
  els.selector.value = state.override ?? "auto";
  els.selector.disabled = state.infoError !== null;
  els.selector.title = state.infoError
    ? `emotion list unavailable: ${state.infoError}`
    : "override the detected emotion";

  els.banner.textContent = state.banner ?? "";
  els.banner.classList.toggle("visible", state.banner !== null);

  els.input.disabled = state.busy;
  els.send.disabled = state.busy;
  if (els.input.value !== state.draft) els.input.value = state.draft;

  els.timeline.replaceChildren(
    ...[...state.messages]
      .sort((a, b) => a.timestamp - b.timestamp)
      .map((m) => renderMessage(m, labels)),
  );
  els.timeline.scrollTop = els.timeline.scrollHeight;
}
