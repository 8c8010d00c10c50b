/**
 * The console's four panels: pair upload, live loss chart, apply form,
 * and the attempt history gallery. Pure presentation over the API client;
 * every displayed value comes from a service response or a form control.
 */

import { ApiClient, ApiError, ApplyJob, InversionJob } from "./api.js";
import { LossChart } from "./chart.js";
import { JobPoller, PollRegistry } from "./poll.js";
import { HistoryEntry, SessionState } from "./state.js";
import { budgetFor, countTokens, wouldOverflow } from "./tokens.js";

export const DEFAULT_LAMBDA_MSE = 4;
export const DEFAULT_LAMBDA_CLIP = 0.1;
export const DEFAULT_TEXT_SCALE = 7.5;
export const DEFAULT_IMAGE_SCALE = 1.5;

type Attrs = Record<string, string>;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Attrs = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

interface PairRow {
  root: HTMLElement;
  before: HTMLInputElement;
  after: HTMLInputElement;
}

export class UploadPanel {
  readonly root: HTMLElement;
  readonly submitButton: HTMLButtonElement;
  readonly lambdaMse: HTMLInputElement;
  readonly lambdaClip: HTMLInputElement;
  readonly steps: HTMLInputElement;
  readonly initText: HTMLInputElement;
  readonly errorBox: HTMLElement;
  private readonly pairList: HTMLElement;
  private readonly pairs: PairRow[] = [];

  constructor(
    private readonly doc: Document,
    private readonly api: ApiClient,
    private readonly onJobStarted: (jobId: string) => void,
  ) {
    this.root = el(doc, "section", { class: "panel upload-panel" });
    this.root.appendChild(el(doc, "h2", {}, "1. teach an edit"));
    this.pairList = el(doc, "div", { class: "pair-list" });
    this.root.appendChild(this.pairList);

    const addButton = el(doc, "button", { type: "button", class: "add-pair" }, "add pair");
    addButton.addEventListener("click", () => this.addPair());
    this.root.appendChild(addButton);

    this.lambdaMse = this.slider("lambda_mse", String(DEFAULT_LAMBDA_MSE), "0.5", "10", "0.5");
    this.lambdaClip = this.slider("lambda_clip", String(DEFAULT_LAMBDA_CLIP), "0", "1", "0.05");
    this.steps = el(doc, "input", {
      type: "number", name: "n_steps", value: "1000", min: "1",
    });
    this.initText = el(doc, "input", {
      type: "text", name: "init_text", value: "edit the image",
    });
    const config = el(doc, "div", { class: "config-grid" });
    config.append(
      this.labeled("reconstruction weight", this.lambdaMse),
      this.labeled("alignment weight", this.lambdaClip),
      this.labeled("steps", this.steps),
      this.labeled("init text", this.initText),
    );
    this.root.appendChild(config);

    this.submitButton = el(doc, "button", { type: "button", class: "submit" }, "optimize");
    this.submitButton.addEventListener("click", () => void this.submit());
    this.root.appendChild(this.submitButton);
    this.errorBox = el(doc, "div", { class: "error-box", role: "alert" });
    this.root.appendChild(this.errorBox);

    this.addPair();
    this.refresh();
  }

  private slider(name: string, value: string, min: string, max: string, step: string) {
    return el(this.doc, "input", { type: "range", name, value, min, max, step });
  }

  private labeled(text: string, input: HTMLElement): HTMLElement {
    const wrap = el(this.doc, "label", { class: "field" });
    wrap.append(el(this.doc, "span", {}, text), input);
    return wrap;
  }

  addPair(): void {
    const row = el(this.doc, "div", { class: "pair-row" });
    const before = el(this.doc, "input", { type: "file", accept: "image/*", name: "before" });
    const after = el(this.doc, "input", { type: "file", accept: "image/*", name: "after" });
    before.addEventListener("change", () => this.refresh());
    after.addEventListener("change", () => this.refresh());
    row.append(
      this.labeled("before", before),
      this.labeled("after", after),
    );
    this.pairList.appendChild(row);
    this.pairs.push({ root: row, before, after });
  }

  /** Rows where both files are chosen; a row with only one disables submit. */
  completePairs(): { before: File; after: File }[] {
    const complete: { before: File; after: File }[] = [];
    for (const pair of this.pairs) {
      const b = pair.before.files?.[0];
      const a = pair.after.files?.[0];
      if (b && a) complete.push({ before: b, after: a });
    }
    return complete;
  }

  private hasHalfPair(): boolean {
    return this.pairs.some((pair) => {
      const b = pair.before.files?.[0];
      const a = pair.after.files?.[0];
      return Boolean(b) !== Boolean(a);
    });
  }

  refresh(): void {
    this.submitButton.disabled = this.completePairs().length === 0 || this.hasHalfPair();
  }

  async submit(): Promise<void> {
    this.errorBox.textContent = "";
    try {
      const jobId = await this.api.createInversion({
        pairs: this.completePairs(),
        config: {
          n_steps: Number(this.steps.value),
          lambda_mse: Number(this.lambdaMse.value),
          lambda_clip: Number(this.lambdaClip.value),
          init_text: this.initText.value,
        },
      });
      this.onJobStarted(jobId);
    } catch (err) {
      this.errorBox.textContent = err instanceof ApiError ? err.message : String(err);
    }
  }
}

export class LossPanel {
  readonly root: HTMLElement;
  readonly chart: LossChart;
  readonly statusLine: HTMLElement;
  readonly banner: HTMLElement;
  private readonly jobLabel: HTMLElement;

  constructor(
    doc: Document,
    private readonly api: ApiClient,
    private readonly registry: PollRegistry,
    private readonly onInstructionReady: (instructionId: string) => void,
  ) {
    this.root = el(doc, "section", { class: "panel loss-panel" });
    this.root.appendChild(el(doc, "h2", {}, "2. watch it learn"));
    this.jobLabel = el(doc, "div", { class: "job-label" }, "no job yet");
    this.statusLine = el(doc, "div", { class: "status-line" });
    this.banner = el(doc, "div", { class: "banner", role: "alert" });
    this.chart = new LossChart(doc);
    this.root.append(this.jobLabel, this.statusLine, this.banner, this.chart.svg);
  }

  watch(jobId: string): JobPoller<InversionJob> {
    this.jobLabel.textContent = `job ${jobId}`;
    this.banner.textContent = "";
    const poller = this.registry.track(
      new JobPoller<InversionJob>(jobId, (id) => this.api.getInversion(id), {
        onUpdate: (body) => this.render(body),
        onDone: (body) => {
          this.render(body);
          if (body.instruction_id) this.onInstructionReady(body.instruction_id);
        },
        onFailed: (body) => {
          this.banner.textContent = `optimization failed: ${body.error ?? "unknown error"}`;
        },
        onGone: () => {
          this.banner.textContent = `job ${jobId} is gone; polling stopped`;
        },
      }),
    );
    poller.start();
    return poller;
  }

  private render(body: InversionJob): void {
    this.statusLine.textContent =
      `${body.state} - step ${body.progress.completed}/${body.progress.total}`;
    this.chart.update(body.loss);
  }
}

export class ApplyPanel {
  readonly root: HTMLElement;
  readonly submitButton: HTMLButtonElement;
  readonly instructionSelect: HTMLSelectElement;
  readonly imageInput: HTMLInputElement;
  readonly extraText: HTMLTextAreaElement;
  readonly counter: HTMLElement;
  readonly textScale: HTMLInputElement;
  readonly imageScale: HTMLInputElement;
  readonly resetScales: HTMLButtonElement;
  readonly noiseMode: HTMLSelectElement;
  readonly runSeed: HTMLInputElement;
  readonly sampler: HTMLSelectElement;
  readonly samplerSteps: HTMLInputElement;
  readonly errorBox: HTMLElement;
  private instructionK = new Map<string, number>();

  constructor(
    private readonly doc: Document,
    private readonly api: ApiClient,
    private readonly registry: PollRegistry,
    private readonly state: SessionState,
  ) {
    this.root = el(doc, "section", { class: "panel apply-panel" });
    this.root.appendChild(el(doc, "h2", {}, "3. try it on new images"));

    this.instructionSelect = el(doc, "select", { name: "instruction" });
    this.imageInput = el(doc, "input", { type: "file", accept: "image/*", name: "image" });
    this.extraText = el(doc, "textarea", { name: "extra_text", rows: "2" });
    this.counter = el(doc, "span", { class: "token-counter" });
    this.textScale = el(doc, "input", {
      type: "range", name: "text_scale",
      value: String(DEFAULT_TEXT_SCALE), min: "1", max: "15", step: "0.5",
    });
    this.imageScale = el(doc, "input", {
      type: "range", name: "image_scale",
      value: String(DEFAULT_IMAGE_SCALE), min: "1", max: "5", step: "0.1",
    });
    this.resetScales = el(doc, "button", { type: "button" }, "reset scales");
    this.noiseMode = el(doc, "select", { name: "noise_mode" });
    for (const mode of ["fixed", "random"]) {
      this.noiseMode.appendChild(el(doc, "option", { value: mode }, mode));
    }
    this.runSeed = el(doc, "input", { type: "number", name: "run_seed", value: "0" });
    this.sampler = el(doc, "select", { name: "sampler" });
    for (const s of ["deterministic", "ancestral"]) {
      this.sampler.appendChild(el(doc, "option", { value: s }, s));
    }
    this.samplerSteps = el(doc, "input", {
      type: "number", name: "sampler_steps", value: "100", min: "1",
    });

    this.extraText.addEventListener("input", () => this.refreshCounter());
    this.instructionSelect.addEventListener("change", () => {
      const id = this.instructionSelect.value;
      if (id) this.state.setInstruction(id);
      this.refreshCounter();
    });
    this.resetScales.addEventListener("click", () => {
      this.textScale.value = String(DEFAULT_TEXT_SCALE);
      this.imageScale.value = String(DEFAULT_IMAGE_SCALE);
    });
    this.noiseMode.addEventListener("change", () => {
      this.runSeed.disabled = this.noiseMode.value !== "random";
    });
    this.runSeed.disabled = true;

    const grid = el(doc, "div", { class: "config-grid" });
    const pairs: [string, HTMLElement][] = [
      ["instruction", this.instructionSelect],
      ["test image", this.imageInput],
      ["extra text", this.extraText],
      ["text scale", this.textScale],
      ["image scale", this.imageScale],
      ["noise", this.noiseMode],
      ["run seed", this.runSeed],
      ["sampler", this.sampler],
      ["sampler steps", this.samplerSteps],
    ];
    for (const [label, input] of pairs) {
      const wrap = el(doc, "label", { class: "field" });
      wrap.append(el(doc, "span", {}, label), input);
      grid.appendChild(wrap);
    }
    this.root.appendChild(grid);
    this.root.appendChild(this.counter);
    this.root.appendChild(this.resetScales);

    this.submitButton = el(doc, "button", { type: "button", class: "submit" }, "apply");
    this.submitButton.addEventListener("click", () => void this.submit());
    this.root.appendChild(this.submitButton);
    this.errorBox = el(doc, "div", { class: "error-box", role: "alert" });
    this.root.appendChild(this.errorBox);
    this.refreshCounter();
  }

  async refreshInstructions(selectId?: string): Promise<void> {
    const rows = await this.api.listInstructions();
    this.instructionK = new Map(rows.map((row) => [row.id, row.k]));
    this.instructionSelect.textContent = "";
    for (const row of rows) {
      this.instructionSelect.appendChild(
        el(this.doc, "option", { value: row.id }, `${row.id} (k=${row.k})`),
      );
    }
    if (selectId && this.instructionK.has(selectId)) {
      this.instructionSelect.value = selectId;
      this.state.setInstruction(selectId);
    }
    this.refreshCounter();
  }

  private selectedK(): number {
    return this.instructionK.get(this.instructionSelect.value) ?? 0;
  }

  refreshCounter(): void {
    const k = this.selectedK();
    const used = countTokens(this.extraText.value);
    const over = wouldOverflow(k, this.extraText.value);
    this.counter.textContent = `${used}/${budgetFor(k)} extra tokens`;
    this.counter.classList.toggle("over", over);
    this.submitButton.disabled = over;
  }

  async submit(): Promise<void> {
    this.errorBox.textContent = "";
    const image = this.imageInput.files?.[0];
    const instructionId = this.instructionSelect.value;
    if (!image || !instructionId) {
      this.errorBox.textContent = "pick an instruction and a test image first";
      return;
    }
    const params = {
      extraText: this.extraText.value,
      textScale: Number(this.textScale.value),
      imageScale: Number(this.imageScale.value),
      noiseMode: this.noiseMode.value,
    };
    try {
      const jobId = await this.api.createApply({
        instructionId,
        image,
        imageName: image.name,
        extraText: params.extraText,
        guidance: {
          text_scale: params.textScale,
          image_scale: params.imageScale,
          sampler_steps: Number(this.samplerSteps.value),
          noise_mode: params.noiseMode as "fixed" | "random",
          sampler: this.sampler.value as "deterministic" | "ancestral",
          run_seed: Number(this.runSeed.value),
        },
      });
      const poller = this.registry.track(
        new JobPoller<ApplyJob>(jobId, (id) => this.api.getJob(id), {
          onUpdate: () => undefined,
          onDone: (body) => {
            if (!body.sidecar || !body.image_url) return;
            const entry: HistoryEntry = {
              jobId,
              testImageName: image.name,
              extraText: params.extraText,
              textScale: params.textScale,
              imageScale: params.imageScale,
              noiseMode: params.noiseMode,
              imageUrl: this.api.baseUrl + body.image_url,
              sidecar: body.sidecar,
            };
            this.state.appendHistory(entry);
          },
          onFailed: (body) => {
            this.errorBox.textContent = `apply failed: ${body.error ?? "unknown error"}`;
          },
          onGone: () => {
            this.errorBox.textContent = `job ${jobId} vanished before finishing`;
          },
        }),
      );
      poller.start();
    } catch (err) {
      this.errorBox.textContent = err instanceof ApiError ? err.message : String(err);
    }
  }
}

export class HistoryGallery {
  readonly root: HTMLElement;
  private readonly list: HTMLElement;

  constructor(
    private readonly doc: Document,
    state: SessionState,
  ) {
    this.root = el(doc, "section", { class: "panel history-panel" });
    this.root.appendChild(el(doc, "h2", {}, "4. attempts"));
    this.list = el(doc, "div", { class: "history-list" });
    this.root.appendChild(this.list);
    state.onChange(() => this.render(state.history));
    this.render(state.history);
  }

  private render(entries: readonly import("./state.js").HistoryEntry[]): void {
    this.list.textContent = "";
    for (const entry of entries) {
      const card = el(this.doc, "article", { class: "history-card" });
      const img = el(this.doc, "img", {
        src: entry.imageUrl,
        alt: `edit of ${entry.testImageName}`,
        class: "thumb",
      });
      const caption = el(
        this.doc, "div", { class: "caption" },
        entry.extraText ? `+ "${entry.extraText}"` : "(learned instruction only)",
      );
      const params = el(
        this.doc, "div", { class: "params" },
        `s_T=${entry.textScale} s_I=${entry.imageScale} noise=${entry.noiseMode}`,
      );
      const details = el(this.doc, "details");
      details.appendChild(el(this.doc, "summary", {}, "sidecar"));
      details.appendChild(el(this.doc, "pre", {}, JSON.stringify(entry.sidecar, null, 2)));
      card.append(img, caption, params, details);
      this.list.appendChild(card);
    }
  }
}
