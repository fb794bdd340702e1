// DOM wiring for the tuner. All logic lives in state.ts/overlay.ts; this
// file only binds widgets to the controller and repaints on state change.

import { TunerApi } from "./api.js";
import { renderOverlay } from "./overlay.js";
import { DEBOUNCE_MS, TunerController } from "./state.js";
import type { SegParams } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const api = new TunerApi();
const controller = new TunerController(api);

const imageSelect = el<HTMLSelectElement>("image-select");
const pageImage = el<HTMLImageElement>("page-image");
const overlayCanvas = el<HTMLCanvasElement>("overlay");
const banner = el<HTMLDivElement>("banner");
const status = el<HTMLDivElement>("status");
const applyButton = el<HTMLButtonElement>("apply");
const exportButton = el<HTMLButtonElement>("export");

const fields: Array<[keyof SegParams, HTMLInputElement | HTMLSelectElement]> = [
  ["connectivity", el<HTMLSelectElement>("connectivity")],
  ["small_blob_area", el<HTMLInputElement>("small-blob-area")],
  ["line_gap", el<HTMLInputElement>("line-gap")],
  ["reading_order", el<HTMLSelectElement>("reading-order")],
];

function readField(name: keyof SegParams, raw: string): SegParams[keyof SegParams] {
  if (name === "reading_order") return raw as SegParams["reading_order"];
  return Number(raw) as SegParams[keyof SegParams];
}

for (const [name, widget] of fields) {
  widget.addEventListener("input", () => {
    controller.adjust(name, readField(name, widget.value) as never);
    const label = document.querySelector(`label[for="${widget.id}"] .value`);
    if (label) label.textContent = widget.value;
  });
}

applyButton.addEventListener("click", () => void controller.apply());

exportButton.addEventListener("click", () => {
  void controller.exportParams().then((text) => {
    const blob = new Blob([text], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "seg-params.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });
});

imageSelect.addEventListener("change", () => {
  const id = imageSelect.value;
  pageImage.src = api.imageUrl(id);
  void controller.selectImage(id);
});

controller.onChange((state) => {
  banner.hidden = state.banner === null;
  banner.textContent = state.banner ?? "";
  for (const [name, widget] of fields) {
    const message = state.fieldErrors[name];
    widget.classList.toggle("invalid", Boolean(message));
    const slot = document.querySelector(`#error-${widget.id}`);
    if (slot) slot.textContent = message ?? "";
  }
  if (state.lastResponse) {
    overlayCanvas.width = state.lastResponse.width;
    overlayCanvas.height = state.lastResponse.height;
    const ctx = overlayCanvas.getContext("2d");
    if (ctx) {
      const counts = renderOverlay(ctx, state.lastResponse);
      status.textContent =
        `${state.lastResponse.lines.length} lines, ${counts.boxes} boxes, ` +
        `${counts.dimmed} noise blobs` +
        (state.dirty ? " (draft edited, not applied)" : "") +
        (state.inFlight ? " …" : "");
    }
  } else {
    status.textContent = state.inFlight ? "segmenting…" : "select an image";
  }
});

async function start(): Promise<void> {
  const images = await api.listImages();
  for (const entry of images) {
    const option = document.createElement("option");
    option.value = entry.id;
    option.textContent = `${entry.id} (${entry.width}×${entry.height})`;
    imageSelect.appendChild(option);
  }
  const stored = await api.getParams();
  controller.setDraft(stored);
  for (const [name, widget] of fields) {
    widget.value = String(stored[name]);
  }
  if (images.length) {
    imageSelect.value = images[0].id;
    pageImage.src = api.imageUrl(images[0].id);
    await controller.selectImage(images[0].id);
  }
}

void start();

// referenced so the bundle keeps the constant for curious consoles
export { DEBOUNCE_MS };
