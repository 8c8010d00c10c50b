import type { Sidecar } from "../src/api.js";

/** A fully-populated sidecar for tests; override the fields under test. */
export function fakeSidecar(overrides: Partial<Sidecar> = {}): Sidecar {
  return {
    instruction: "instr-1",
    model_id: "tiny-editor/v1",
    instruction_k: 3,
    base_seed: 0,
    extra_text: "",
    text_scale: 7.5,
    image_scale: 1.5,
    sampler: "deterministic",
    sampler_steps: 100,
    noise_mode: "fixed",
    run_seed: 0,
    input_sha256: "11".repeat(32),
    output_sha256: "22".repeat(32),
    ...overrides,
  };
}

/** Set the files on a file input (jsdom has no picker) and fire change. */
export function setFiles(input: HTMLInputElement, files: File[]): void {
  Object.defineProperty(input, "files", { value: files, configurable: true });
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function pngFile(name: string, firstByte = 0x89): File {
  const bytes = new Uint8Array([firstByte, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 1, 2, 3]);
  return new File([bytes], name, { type: "image/png" });
}
