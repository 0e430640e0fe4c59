import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { QueueApp } from "../src/app";
import type { VerifyItem } from "../src/types";

interface MockServer {
  fetchFn: (input: string, init?: RequestInit) => Promise<Response>;
  decisionPosts: { item_id: string; action: string; manual_text?: string }[];
  items: Map<string, VerifyItem>;
  failNextDecisionWith?: number;
}

function mkItem(id: string, wer: number, gt: string[], pred: string[]): VerifyItem {
  return {
    id, gt, pred, wer,
    start_s: 0, end_s: 1.2, duration_s: 1.2,
    status: "pending",
  };
}

/** In-memory stand-in for the verify service. */
function mockServer(items: VerifyItem[]): MockServer {
  const byId = new Map(items.map((it) => [it.id, { ...it }]));
  const server: MockServer = {
    decisionPosts: [],
    items: byId,
    fetchFn: async (input, init) => {
      const url = typeof input === "string" ? input : String(input);
      if (url.includes("/api/items?")) {
        const pending = [...byId.values()].filter((it) => it.status === "pending");
        const decided = byId.size - pending.length;
        return Response.json({
          items: pending, page: 1, pages: 1, total: pending.length,
          counts: { pending: pending.length, decided },
        });
      }
      if (url.endsWith("/api/decisions") && init?.method === "POST") {
        const body = JSON.parse(String(init.body));
        server.decisionPosts.push(body);
        if (server.failNextDecisionWith) {
          const status = server.failNextDecisionWith;
          server.failNextDecisionWith = undefined;
          return Response.json({ error: "conflict" }, { status });
        }
        const item = byId.get(body.item_id);
        if (!item) return Response.json({ error: "unknown" }, { status: 404 });
        item.status = "decided";
        return Response.json(item);
      }
      return Response.json({ error: `no route ${url}` }, { status: 404 });
    },
  };
  return server;
}

const FIXTURE = [
  mkItem("v-low", 0.2, ["the", "dog", "ran"], ["the", "fog", "ran"]),
  mkItem("v-high", 0.4, ["a", "big", "frog", "sat", "down"], ["a", "big", "bog", "at", "down"]),
  mkItem("v-mid", 0.3, ["we", "went", "home"], ["we", "want", "home"]),
];

function keydown(key: string): KeyboardEvent {
  return new KeyboardEvent("keydown", { key, bubbles: true });
}

describe("QueueApp", () => {
  let root: HTMLElement;
  let server: MockServer;
  let app: QueueApp;
  let played: string[];

  beforeEach(async () => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app") as HTMLElement;
    server = mockServer(FIXTURE);
    played = [];
    app = new QueueApp({
      api: new ApiClient(server.fetchFn),
      root,
      playAudio: async (url) => { played.push(url); },
    });
    await app.refresh();
  });

  it("renders the queue worst WER first", () => {
    const ids = [...root.querySelectorAll<HTMLElement>(".item")].map(
      (el) => el.dataset.id,
    );
    expect(ids).toEqual(["v-high", "v-mid", "v-low"]);
    expect(root.querySelector(".counts")?.textContent).toBe("3 pending · 0 decided");
  });

  it("highlights exactly the differing words of the cursor item", () => {
    const cursorItem = root.querySelector(".item.cursor") as HTMLElement;
    expect(cursorItem.dataset.id).toBe("v-high");
    const gtChanged = [...cursorItem.querySelectorAll(".row.gt .tok.changed")].map(
      (el) => el.textContent,
    );
    const predChanged = [...cursorItem.querySelectorAll(".row.pred .tok.changed")].map(
      (el) => el.textContent,
    );
    expect(gtChanged).toEqual(["frog", "sat"]);
    expect(predChanged).toEqual(["bog", "at"]);
  });

  it("issues exactly one POST per keyboard action", async () => {
    app.handleKey(keydown("g"));
    await new Promise((r) => setTimeout(r, 0));
    expect(server.decisionPosts).toEqual([
      { item_id: "v-high", action: "accept_gt" },
    ]);

    app.handleKey(keydown("p"));
    await new Promise((r) => setTimeout(r, 0));
    expect(server.decisionPosts).toHaveLength(2);
    expect(server.decisionPosts[1]).toEqual({ item_id: "v-mid", action: "accept_pred" });
  });

  it("never sends a decision twice while one is in flight", async () => {
    let release: () => void = () => {};
    const gate = new Promise<void>((r) => { release = r; });
    const slowFetch: typeof server.fetchFn = async (input, init) => {
      if (String(input).endsWith("/api/decisions")) await gate;
      return server.fetchFn(input, init);
    };
    const slowApp = new QueueApp({
      api: new ApiClient(slowFetch), root,
      playAudio: async () => {},
    });
    await slowApp.refresh();
    slowApp.handleKey(keydown("r"));
    slowApp.handleKey(keydown("r"));
    slowApp.handleKey(keydown("g"));
    release();
    await new Promise((r) => setTimeout(r, 0));
    expect(server.decisionPosts).toHaveLength(1);
  });

  it("advances the cursor to the next pending item after a decision", async () => {
    await app.submitDecision("reject");
    const cursorItem = root.querySelector(".item.cursor") as HTMLElement;
    expect(cursorItem.dataset.id).toBe("v-mid");
    expect(root.querySelector(".counts")?.textContent).toBe("2 pending · 1 decided");
  });

  it("shows the completion state after the last decision", async () => {
    await app.submitDecision("reject");
    await app.submitDecision("accept_gt");
    await app.submitDecision("accept_pred");
    expect(root.querySelector(".completion")?.textContent).toContain(
      "All items reviewed",
    );
    expect(root.querySelectorAll(".item")).toHaveLength(0);
    expect(server.decisionPosts).toHaveLength(3);
  });

  it("blocks manual submission without text, client side", async () => {
    app.openManual();
    const input = root.querySelector(".manual-input") as HTMLInputElement;
    input.value = "   ";
    await app.submitDecision("manual", input.value);
    expect(server.decisionPosts).toHaveLength(0);
    expect(root.querySelector(".manual-hint")?.textContent).toBe("text is required");
  });

  it("submits manual text with Enter from the input box", async () => {
    app.openManual();
    const input = root.querySelector(".manual-input") as HTMLInputElement;
    input.value = "a big frog sat down";
    const ev = new KeyboardEvent("keydown", { key: "Enter", bubbles: true });
    Object.defineProperty(ev, "target", { value: input });
    app.handleKey(ev);
    await new Promise((r) => setTimeout(r, 0));
    expect(server.decisionPosts).toEqual([
      { item_id: "v-high", action: "manual", manual_text: "a big frog sat down" },
    ]);
  });

  it("refreshes after a conflict instead of looping", async () => {
    server.failNextDecisionWith = 409;
    server.items.get("v-high")!.status = "decided";
    await app.submitDecision("accept_gt");
    expect(root.querySelector(".toast")?.textContent).toContain("already decided");
    const ids = [...root.querySelectorAll<HTMLElement>(".item")].map(
      (el) => el.dataset.id,
    );
    expect(ids).toEqual(["v-mid", "v-low"]);
  });

  it("plays the cursor item's audio and allows replay", async () => {
    await app.play();
    await app.play();
    expect(played).toEqual(["/api/audio/v-high", "/api/audio/v-high"]);
  });

  it("shows a connection banner when the API is down", async () => {
    const downApp = new QueueApp({
      api: new ApiClient(async () => { throw new Error("ECONNREFUSED"); }),
      root,
      playAudio: async () => {},
    });
    await downApp.refresh();
    expect(root.querySelector(".banner")?.textContent).toContain(
      "cannot reach the verify service",
    );
  });
});
