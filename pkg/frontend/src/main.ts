import { App } from "./app.js";

window.addEventListener("DOMContentLoaded", () => {
  void new App("").connect();
});
