/**
 * Wire the console together. The API origin defaults to the page's own
 * and can be overridden with ?api=http://host:port when the static files
 * are served separately from the service.
 */

import { ApiClient } from "./api.js";
import { ApplyPanel, HistoryGallery, LossPanel, UploadPanel } from "./panels.js";
import { PollRegistry } from "./poll.js";
import { SessionState } from "./state.js";

export function mountConsole(root: HTMLElement, api: ApiClient, doc: Document = document) {
  const state = new SessionState();
  const registry = new PollRegistry();

  const applyPanel = new ApplyPanel(doc, api, registry, state);
  const lossPanel = new LossPanel(doc, api, registry, (instructionId) => {
    state.setInstruction(instructionId);
    void applyPanel.refreshInstructions(instructionId);
  });
  const uploadPanel = new UploadPanel(doc, api, (jobId) => lossPanel.watch(jobId));
  const gallery = new HistoryGallery(doc, state);

  root.append(uploadPanel.root, lossPanel.root, applyPanel.root, gallery.root);
  return { state, registry, uploadPanel, lossPanel, applyPanel, gallery };
}

function apiBaseFromLocation(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "";
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const api = new ApiClient(apiBaseFromLocation());
  const root = document.getElementById("app") as HTMLElement;
  mountConsole(root, api);
  const status = document.getElementById("backend-status");
  if (status) {
    api.health().then(
      (body) => (status.textContent = `service ok - ${body.model_id}`),
      () => (status.textContent = "service unreachable"),
    );
  }
}
