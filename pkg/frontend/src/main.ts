import { ApiClient } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}
const params = new URLSearchParams(window.location.search);
const app = new App(root, new ApiClient(), window.localStorage);
void app.start(params.get("version") ?? undefined);
