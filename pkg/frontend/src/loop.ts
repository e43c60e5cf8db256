// Active-learning loop view model: submit a config, then poll the job
// snapshot every second. Chart points are exactly the server's
// per_iteration_log entries — nothing is computed client-side.

import { ApiClient, ApiError, IterationLogEntryDto, LoopJobDto } from "./api.js";

export const POLL_INTERVAL_MS = 1000;

export class LoopView {
  jobId: string | null = null;
  jobStatus: "none" | "running" | "done" | "failed" = "none";
  chartPoints: IterationLogEntryDto[] = [];
  labeledCount = 0;
  remainingBudget = 0;
  error: string | null = null;
  submitDisabledReason: string | null = null;

  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly api: ApiClient) {}

  get submitDisabled(): boolean {
    return this.jobStatus === "running";
  }

  async submit(config: Record<string, unknown>): Promise<void> {
    if (this.submitDisabled) {
      this.submitDisabledReason = "a loop job is already running";
      return;
    }
    this.error = null;
    this.submitDisabledReason = null;
    try {
      const { job_id } = await this.api.startLoop(config);
      this.jobId = job_id;
      this.jobStatus = "running";
      this.chartPoints = [];
      this.startPolling();
    } catch (e) {
      if (e instanceof ApiError && e.status === 409) {
        this.submitDisabledReason = "a loop job is already running";
      } else {
        this.error = e instanceof ApiError ? e.message : String(e);
      }
    }
  }

  /** Re-attach to a known job (e.g. after a page refresh). */
  async attach(jobId: string): Promise<void> {
    this.jobId = jobId;
    this.jobStatus = "running";
    await this.poll();
    if (this.jobStatus === "running") this.startPolling();
  }

  startPolling(intervalMs: number = POLL_INTERVAL_MS): void {
    this.stopPolling();
    this.timer = setInterval(() => void this.poll(), intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async poll(): Promise<void> {
    if (!this.jobId) return;
    let job: LoopJobDto;
    try {
      job = await this.api.getLoopJob(this.jobId);
    } catch (e) {
      this.error = e instanceof ApiError ? e.message : String(e);
      this.stopPolling();
      return;
    }
    this.jobStatus = job.status;
    if (job.status === "failed") this.error = job.error;
    const state = job.state ?? {};
    this.chartPoints = state.per_iteration_log ?? [];
    this.labeledCount = state.labeled_count ?? 0;
    this.remainingBudget = state.remaining_budget ?? 0;
    if (job.status !== "running") this.stopPolling();
  }
}
