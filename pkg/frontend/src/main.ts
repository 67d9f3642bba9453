import { ApiClient } from "./api.js";
import { App } from "./app.js";

function apiBase(): string {
  const meta = document.querySelector('meta[name="regqa-api-base"]');
  const fromMeta = meta?.getAttribute("content");
  const fromGlobal = (window as { REGQA_API_BASE?: string }).REGQA_API_BASE;
  return fromGlobal || fromMeta || "http://127.0.0.1:8000";
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
new App(root, new ApiClient(apiBase())).start();
