// DOM wiring for the console. All state lives in the view models; this file
// only renders them and forwards user events.

import { ApiClient } from "./api.js";
import { AnnotationView } from "./annotations.js";
import { ChatView } from "./chat.js";
import { LoopView } from "./loop.js";

const api = new ApiClient(
  window.location.origin,
  new URLSearchParams(window.location.search).get("token"),
);
const chat = new ChatView(api);
const annotations = new AnnotationView(api);
const loop = new LoopView(api);

const $ = (id: string) => document.getElementById(id)!;

function el(tag: string, cls: string, text = ""): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  node.textContent = text;
  return node;
}

const round2 = (x: number) => x.toFixed(2);

// --- chat view ---

function renderChat(): void {
  const list = $("chat-turns");
  list.replaceChildren();
  for (const turn of chat.turns) {
    const row = el("div", `turn turn-${turn.speaker}`);
    row.appendChild(el("span", "speaker", turn.speaker));
    row.appendChild(el("span", "text", turn.text));
    if (turn.sdrt) row.appendChild(el("span", "sdrt-badge", turn.sdrt));
    list.appendChild(row);
  }
  $("chat-error").textContent = chat.error ?? "";
  ($("chat-input") as HTMLInputElement).value = chat.pendingText;
  $("chat-status").textContent =
    chat.status === "idle" ? "no safety violation detected" : chat.status;
}

$("chat-upload").addEventListener("change", async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  bytes.forEach((b) => (binary += String.fromCharCode(b)));
  await chat.start(btoa(binary), file.name);
  renderChat();
});

$("chat-send").addEventListener("click", async () => {
  const input = $("chat-input") as HTMLInputElement;
  await chat.send(input.value.trim());
  renderChat();
});

// --- annotation view ---

function renderQueue(): void {
  const list = $("queue-items");
  list.replaceChildren();
  for (const item of annotations.items) {
    const row = el("div", "queue-item");
    row.appendChild(el("div", "violation", item.violation_text));
    row.appendChild(el("div", "image-uri", item.image_uri));
    const editBox = document.createElement("input");
    editBox.placeholder = "edited text";
    const button = (label: string, fn: () => Promise<boolean>) => {
      const b = el("button", `decide-${label}`, label) as HTMLButtonElement;
      b.addEventListener("click", async () => {
        await fn();
        renderQueue();
      });
      return b;
    };
    row.appendChild(
      button("correct", () => annotations.decide(item.record_id, "correct")),
    );
    row.appendChild(
      button("edit", () =>
        annotations.decide(item.record_id, "edit", editBox.value.trim()),
      ),
    );
    row.appendChild(editBox);
    row.appendChild(
      button("discard", () => annotations.decide(item.record_id, "discard")),
    );
    list.appendChild(row);
  }
  $("queue-notice").textContent = annotations.notice ?? "";
  $("queue-error").textContent = annotations.error ?? "";
}

$("queue-reload").addEventListener("click", async () => {
  await annotations.load();
  renderQueue();
});

// --- loop view ---

function renderLoop(): void {
  ($("loop-submit") as HTMLButtonElement).disabled = loop.submitDisabled;
  $("loop-submit").title = loop.submitDisabledReason ?? "";
  $("loop-status").textContent =
    `${loop.jobStatus} — labeled ${loop.labeledCount}, ` +
    `budget left ${loop.remainingBudget}`;
  $("loop-error").textContent = loop.error ?? "";
  const chart = $("loop-chart");
  chart.replaceChildren();
  for (const point of loop.chartPoints) {
    const row = el("div", "chart-point");
    row.appendChild(el("span", "iter", `iter ${point.iteration}`));
    const s = point.scores_summary;
    row.appendChild(
      el(
        "span",
        "scores",
        `informativeness min ${round2(s.min)} / mean ${round2(s.mean)}` +
          ` / max ${round2(s.max)}`,
      ),
    );
    if (point.keyword_coverage !== undefined) {
      row.appendChild(el("span", "coverage", `${point.keyword_coverage} kw`));
    }
    const bar = el("div", "bar");
    bar.style.width = `${Math.min(100, Math.abs(s.mean) * 50)}%`;
    row.appendChild(bar);
    chart.appendChild(row);
  }
}

$("loop-submit").addEventListener("click", async () => {
  let config: Record<string, unknown>;
  try {
    config = JSON.parse(($("loop-config") as HTMLTextAreaElement).value);
  } catch {
    loop.error = "config is not valid JSON";
    renderLoop();
    return;
  }
  await loop.submit(config);
  renderLoop();
});

setInterval(renderLoop, 1000); // mirror the 1s poll cadence

// --- tabs ---

for (const name of ["chat", "queue", "loop"]) {
  $(`tab-${name}`).addEventListener("click", () => {
    for (const other of ["chat", "queue", "loop"]) {
      $(`view-${other}`).classList.toggle("hidden", other !== name);
    }
    if (name === "queue") void annotations.load().then(renderQueue);
  });
}

void annotations.load().then(renderQueue);
renderChat();
renderLoop();
