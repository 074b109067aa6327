import { ApiClient } from "./api.js";
import { ChatStore } from "./store.js";
import { mountChatUi } from "./ui.js";

const DEFAULT_URL = "http://127.0.0.1:8080";

function bootstrap(): void {
  const urlInput = document.getElementById("server-url") as HTMLInputElement;
  const connect = document.getElementById("connect-button") as HTMLButtonElement;
  urlInput.value = localStorage.getItem("emoxl-server-url") ?? DEFAULT_URL;

  let disposed: (() => void) | null = null;

  const attach = () => {
    const base = urlInput.value.trim() || DEFAULT_URL;
    localStorage.setItem("emoxl-server-url", base);
    const store = new ChatStore(new ApiClient(base));
    disposed?.();
    mountChatUi(store);
    void store.loadModelInfo();
    disposed = () => undefined;
  };

  connect.addEventListener("click", attach);
  attach();
}

document.addEventListener("DOMContentLoaded", bootstrap);
