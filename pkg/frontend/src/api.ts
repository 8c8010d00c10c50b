/**
 * Typed client for the visii HTTP API.
 *
 * Every request the console makes goes through this module, and every
 * number the console displays comes back from one of these calls.
 */

export interface LossPoint {
  step: number;
  t: number;
  total: number;
  mse: number;
  clip: number;
}

export interface JobProgress {
  completed: number;
  total: number;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface InversionJob {
  id: string;
  kind: "invert";
  state: JobState;
  progress: JobProgress;
  created: number;
  error: string | null;
  config: Record<string, unknown>;
  loss: LossPoint[];
  instruction_id?: string;
  instruction_url?: string;
}

export interface Sidecar {
  instruction: string;
  model_id: string;
  instruction_k: number;
  base_seed: number;
  extra_text: string;
  text_scale: number;
  image_scale: number;
  sampler: string;
  sampler_steps: number;
  noise_mode: string;
  run_seed: number;
  input_sha256: string;
  output_sha256: string;
}

export interface ApplyJob {
  id: string;
  kind: "apply";
  state: JobState;
  progress: JobProgress;
  created: number;
  error: string | null;
  instruction_id: string;
  image_url?: string;
  sidecar?: Sidecar;
}

export interface InstructionRow {
  id: string;
  k: number;
  model_id: string;
  created: number;
}

export interface InversionRequest {
  pairs: { before: Blob; after: Blob }[];
  config: {
    n_steps?: number;
    lambda_mse?: number;
    lambda_clip?: number;
    init_text?: string;
    use_clip_loss?: boolean;
    seed?: number;
  };
}

export interface ApplyRequest {
  instructionId: string;
  image: Blob;
  imageName: string;
  extraText: string;
  guidance: {
    text_scale?: number;
    image_scale?: number;
    sampler_steps?: number;
    noise_mode?: "fixed" | "random";
    sampler?: "deterministic" | "ancestral";
    run_seed?: number;
  };
}

/** Non-2xx response, with the service's error message when it sent one. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorFrom(resp: Response): Promise<ApiError> {
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = (await resp.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(resp.status, message);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as T;
  }

  private async postForm<T>(path: string, form: FormData): Promise<T> {
    const resp = await fetch(this.baseUrl + path, { method: "POST", body: form });
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; model_id: string }> {
    return this.getJson("/health");
  }

  async createInversion(req: InversionRequest): Promise<string> {
    const form = new FormData();
    for (const pair of req.pairs) {
      form.append("before", pair.before, "before.png");
      form.append("after", pair.after, "after.png");
    }
    form.append("config", JSON.stringify(req.config));
    const body = await this.postForm<{ job_id: string }>("/inversions", form);
    return body.job_id;
  }

  getInversion(jobId: string): Promise<InversionJob> {
    return this.getJson(`/inversions/${jobId}`);
  }

  async createApply(req: ApplyRequest): Promise<string> {
    const form = new FormData();
    form.append("image", req.image, req.imageName);
    form.append("instruction_id", req.instructionId);
    form.append("extra_text", req.extraText);
    form.append("guidance", JSON.stringify(req.guidance));
    const body = await this.postForm<{ job_id: string }>("/apply", form);
    return body.job_id;
  }

  getJob(jobId: string): Promise<ApplyJob> {
    return this.getJson(`/jobs/${jobId}`);
  }

  listInstructions(): Promise<InstructionRow[]> {
    return this.getJson("/instructions");
  }

  /** URL of an apply job's result; rendered directly by <img>. */
  jobImageUrl(jobId: string): string {
    return `${this.baseUrl}/jobs/${jobId}/image`;
  }

  instructionFileUrl(instructionId: string): string {
    return `${this.baseUrl}/instructions/${instructionId}/file`;
  }
}
