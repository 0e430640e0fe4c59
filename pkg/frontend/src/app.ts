import { ApiClient, ApiError } from "./api";
import { tokenDiff } from "./diff";
import type { DecisionAction, QueueCounts, VerifyItem } from "./types";

export interface AppDeps {
  api: ApiClient;
  root: HTMLElement;
  playAudio: (url: string) => Promise<void>;
}

const KEY_ACTIONS: Record<string, DecisionAction> = {
  g: "accept_gt",
  p: "accept_pred",
  r: "reject",
};

/**
 * The review queue screen. The server is the single source of truth:
 * every decision round-trips and is followed by a full refresh, so the
 * rendered state always equals what a fresh page load would show.
 */
export class QueueApp {
  private items: VerifyItem[] = [];
  private counts: QueueCounts = { pending: 0, decided: 0 };
  private cursor: string | null = null;
  private busy = false;
  private manualOpen = false;
  private manualHint = false;
  private banner: string | null = null;
  private toast: string | null = null;
  private loaded = false;

  constructor(private readonly deps: AppDeps) {}

  async refresh(): Promise<void> {
    try {
      const listing = await this.deps.api.listPending();
      // worst WER first, whatever order the transport delivered
      this.items = [...listing.items].sort((a, b) => b.wer - a.wer);
      this.counts = listing.counts;
      this.banner = null;
      this.loaded = true;
      if (!this.cursor || !this.items.some((it) => it.id === this.cursor)) {
        this.cursor = this.items.length ? this.items[0].id : null;
      }
    } catch (err) {
      this.banner = `cannot reach the verify service: ${String(err)}`;
    }
    this.render();
  }

  current(): VerifyItem | null {
    return this.items.find((it) => it.id === this.cursor) ?? null;
  }

  async submitDecision(action: DecisionAction, manualText?: string): Promise<void> {
    const item = this.current();
    if (this.busy || !item) return;
    if (action === "manual" && !(manualText ?? "").trim()) {
      this.manualHint = true;
      this.render();
      return;
    }
    this.busy = true;
    this.render();
    const followers = this.items
      .filter((it) => it.id !== item.id)
      .map((it) => it.id);
    try {
      await this.deps.api.decide({
        item_id: item.id,
        action,
        ...(action === "manual" ? { manual_text: manualText } : {}),
      });
      this.toast = null;
    } catch (err) {
      this.toast =
        err instanceof ApiError && err.status === 409
          ? `already decided elsewhere; refreshing (${err.message})`
          : `decision failed: ${String(err)}`;
    } finally {
      this.busy = false;
      this.manualOpen = false;
      this.manualHint = false;
    }
    await this.refresh();
    const next = followers.find((id) => this.items.some((it) => it.id === id));
    this.cursor = next ?? (this.items.length ? this.items[0].id : null);
    this.render();
  }

  async play(): Promise<void> {
    const item = this.current();
    if (!item) return;
    try {
      await this.deps.playAudio(this.deps.api.audioUrl(item.id));
    } catch (err) {
      this.toast = `playback failed: ${String(err)}`;
      this.render();
    }
  }

  openManual(): void {
    if (!this.current()) return;
    this.manualOpen = true;
    this.manualHint = false;
    this.render();
    const box = this.deps.root.querySelector<HTMLInputElement>(".manual-input");
    box?.focus();
  }

  handleKey(ev: KeyboardEvent): void {
    const target = ev.target as HTMLElement | null;
    if (this.manualOpen && target?.classList.contains("manual-input")) {
      if (ev.key === "Enter") {
        ev.preventDefault();
        void this.submitDecision("manual", (target as HTMLInputElement).value);
      } else if (ev.key === "Escape") {
        this.manualOpen = false;
        this.render();
      }
      return;
    }
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    const action = KEY_ACTIONS[ev.key];
    if (action) {
      ev.preventDefault();
      void this.submitDecision(action);
    } else if (ev.key === "m") {
      ev.preventDefault();
      this.openManual();
    } else if (ev.key === " ") {
      ev.preventDefault();
      void this.play();
    }
  }

  selectItem(id: string): void {
    this.cursor = id;
    this.manualOpen = false;
    this.render();
  }

  // ----- rendering ---------------------------------------------------

  private el(tag: string, className: string, text?: string): HTMLElement {
    const node = document.createElement(tag);
    node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderTokens(row: HTMLElement, tokens: { word: string; changed: boolean }[]): void {
    for (const tok of tokens) {
      row.appendChild(this.el("span", tok.changed ? "tok changed" : "tok", tok.word));
    }
  }

  private renderItem(item: VerifyItem): HTMLElement {
    const li = this.el("li", item.id === this.cursor ? "item cursor" : "item");
    li.dataset.id = item.id;
    li.addEventListener("click", () => this.selectItem(item.id));

    const meta = this.el("div", "meta");
    meta.appendChild(this.el("span", "item-id", item.id));
    meta.appendChild(this.el("span", "wer", `WER ${(item.wer * 100).toFixed(0)}%`));
    meta.appendChild(this.el("span", "duration", `${item.duration_s.toFixed(2)}s`));
    li.appendChild(meta);

    const diff = tokenDiff(item.gt, item.pred);
    const gtRow = this.el("div", "row gt");
    gtRow.appendChild(this.el("span", "label", "transcript"));
    this.renderTokens(gtRow, diff.gt);
    const predRow = this.el("div", "row pred");
    predRow.appendChild(this.el("span", "label", "heard"));
    this.renderTokens(predRow, diff.pred);
    li.appendChild(gtRow);
    li.appendChild(predRow);

    if (item.id === this.cursor) {
      li.appendChild(this.renderControls());
    }
    return li;
  }

  private renderControls(): HTMLElement {
    const controls = this.el("div", "controls");
    const buttons: [string, string, () => void][] = [
      ["play", "play", () => void this.play()],
      ["accept-gt", "accept transcript (g)", () => void this.submitDecision("accept_gt")],
      ["accept-pred", "accept heard (p)", () => void this.submitDecision("accept_pred")],
      ["manual", "type correction (m)", () => this.openManual()],
      ["reject", "reject (r)", () => void this.submitDecision("reject")],
    ];
    for (const [cls, label, onClick] of buttons) {
      const button = this.el("button", cls, label) as HTMLButtonElement;
      button.disabled = this.busy;
      button.addEventListener("click", (ev) => {
        ev.stopPropagation();
        onClick();
      });
      controls.appendChild(button);
    }
    if (this.manualOpen) {
      const box = this.el("div", "manual-box");
      const input = this.el("input", "manual-input") as HTMLInputElement;
      input.placeholder = "correct transcription, then Enter";
      box.appendChild(input);
      if (this.manualHint) {
        box.appendChild(this.el("span", "manual-hint", "text is required"));
      }
      controls.appendChild(box);
    }
    return controls;
  }

  render(): void {
    const root = this.deps.root;
    root.textContent = "";

    const top = this.el("div", "topbar");
    top.appendChild(this.el("span", "counts",
      `${this.counts.pending} pending · ${this.counts.decided} decided`));
    if (this.banner) {
      top.appendChild(this.el("div", "banner", this.banner));
    }
    if (this.toast) {
      top.appendChild(this.el("div", "toast", this.toast));
    }
    root.appendChild(top);

    if (this.loaded && this.items.length === 0 && !this.banner) {
      const done = this.el("div", "completion", "All items reviewed.");
      done.appendChild(this.el("p", "completion-sub",
        "Export the final dataset from the service, or close this tab."));
      root.appendChild(done);
      return;
    }

    const list = this.el("ul", "queue");
    for (const item of this.items) {
      list.appendChild(this.renderItem(item));
    }
    root.appendChild(list);
  }
}
