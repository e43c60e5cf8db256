// Annotation queue view model: optimistic removal on decision, rolled back
// (at the original position) when the server rejects it. A 409 means a
// second reviewer got there first.

import { ApiClient, ApiError, QueueItemDto } from "./api.js";

export class AnnotationView {
  items: QueueItemDto[] = [];
  notice: string | null = null;
  error: string | null = null;
  busy = false;

  constructor(private readonly api: ApiClient) {}

  async load(): Promise<void> {
    this.error = null;
    try {
      this.items = await this.api.getQueue();
    } catch (e) {
      this.error = e instanceof ApiError ? e.message : String(e);
    }
  }

  /** Returns true when the decision stuck on the server. */
  async decide(
    recordId: string,
    decision: "correct" | "edit" | "discard",
    editedText?: string,
  ): Promise<boolean> {
    this.notice = null;
    this.error = null;
    if (decision === "edit" && !editedText) {
      // mirrors the server's 422 without a round trip
      this.error = "edit requires a non-empty replacement text";
      return false;
    }
    const index = this.items.findIndex((it) => it.record_id === recordId);
    if (index < 0 || this.busy) return false;
    const removed = this.items[index];
    this.items.splice(index, 1); // optimistic
    this.busy = true;
    try {
      await this.api.decide(recordId, decision, editedText);
      return true;
    } catch (e) {
      this.items.splice(index, 0, removed); // rollback
      if (e instanceof ApiError && e.status === 409) {
        this.notice = `"${recordId}" was already decided elsewhere`;
        await this.load(); // resync with the server's view of the queue
      } else {
        this.error = e instanceof ApiError ? e.message : String(e);
      }
      return false;
    } finally {
      this.busy = false;
    }
  }
}
