import { AppShell } from "./app.js";

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app mount point");
  new AppShell(root, window.sessionStorage).start();
});
