// Browser bootstrap: event delegation over the rendered HTML.

import { ApiClient } from "./api.js";
import { ReviewApp, type Host } from "./app.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const root = document.getElementById("app");
if (root) {
  const host: Host = {
    setHtml: (html) => {
      root.innerHTML = html;
    },
    readFreeCode: () => {
      const input = root.querySelector<HTMLInputElement>('[data-role="free-code"]');
      return input ? input.value : "";
    },
  };
  const api = new ApiClient(param("api", window.location.origin));
  const app = new ReviewApp(api, host, param("workflow", "rq1"), param("annotator", "annotator"));

  root.addEventListener("click", (event) => {
    const el = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!el) return;
    const action = el.dataset.action ?? "";
    const data: Record<string, string> = {};
    for (const [key, value] of Object.entries(el.dataset)) {
      if (value !== undefined) data[key] = value;
    }
    void app.handleAction(action, data);
  });

  void app.init();
}
