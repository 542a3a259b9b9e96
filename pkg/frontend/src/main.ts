/** Entry point: wire the client, view and controller from URL params.
 *
 * Usage: index.html?base=http://127.0.0.1:8000&session=s1&interval=1000
 */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { PanelView } from "./view.js";

export function mount(root: HTMLElement, location: Location): SessionController {
  const params = new URLSearchParams(location.search);
  const base = params.get("base") ?? "http://127.0.0.1:8000";
  const sessionId = params.get("session");
  const interval = Number(params.get("interval") ?? "1000");
  if (!sessionId) {
    root.textContent = "missing ?session=<id> parameter";
    throw new Error("missing session id");
  }
  const client = new ApiClient(base);
  let controller: SessionController;
  const view = new PanelView(root, (choice) => controller.submit(choice));
  controller = new SessionController(client, sessionId, view, interval);
  controller.start();
  return controller;
}

declare global {
  interface Window {
    __cdensembleController?: SessionController;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.__cdensembleController = mount(
    document.getElementById("app") as HTMLElement,
    window.location,
  );
}
