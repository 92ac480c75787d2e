import { Client } from "./api.js";
import { initApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  // same-origin by default; set data-api-base on #app for a split setup
  const base = root.dataset.apiBase ?? "";
  initApp(root, new Client({ baseUrl: base }));
}
