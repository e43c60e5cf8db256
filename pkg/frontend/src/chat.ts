// Chat view model. Turn order is never derived client-side: after every
// round trip the turn list is replaced with the server's, so the rendered
// order always equals the server order.

import { ApiClient, ApiError, TurnDto } from "./api.js";

export class ChatView {
  sessionId: string | null = null;
  status: "none" | "idle" | "active" | "closed" = "none";
  turns: TurnDto[] = [];
  error: string | null = null;
  pendingText = "";
  busy = false;

  constructor(private readonly api: ApiClient) {}

  async start(imageBase64: string, title = ""): Promise<void> {
    this.error = null;
    try {
      const session = await this.api.startSession(imageBase64, title);
      this.sessionId = session.session_id;
      if (session.status === "idle") {
        this.status = "idle";
        this.turns = [];
        return;
      }
      this.status = "active";
      await this.refresh();
    } catch (e) {
      this.fail(e);
    }
  }

  async send(text: string): Promise<void> {
    if (!this.sessionId || this.status !== "active" || !text) return;
    this.error = null;
    this.pendingText = text;
    this.busy = true;
    try {
      await this.api.sendMessage(this.sessionId, text);
      await this.refresh();
      this.pendingText = ""; // consumed only on success; kept for retry on error
    } catch (e) {
      this.fail(e);
    } finally {
      this.busy = false;
    }
  }

  async refresh(): Promise<void> {
    if (!this.sessionId) return;
    const session = await this.api.getSession(this.sessionId);
    this.turns = session.turns ?? [];
    if (session.status === "closed") this.status = "closed";
  }

  async close(): Promise<void> {
    if (!this.sessionId) return;
    try {
      await this.api.closeSession(this.sessionId);
      this.status = "closed";
    } catch (e) {
      this.fail(e);
    }
  }

  private fail(e: unknown): void {
    this.error =
      e instanceof ApiError ? `${e.message} (${e.code})` : String(e);
  }
}
