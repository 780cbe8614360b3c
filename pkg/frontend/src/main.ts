import { ApiClient } from "./api.js";
import { Wizard } from "./wizard.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8400";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const wizard = new Wizard(root, new ApiClient(baseUrl));
(window as unknown as { wizard: Wizard }).wizard = wizard;
