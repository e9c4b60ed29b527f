import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import { BoardController } from "../src/board.js";
import { renderBoardHtml } from "../src/view.js";

const PYTHON = process.env.PYTHON ?? "python3";
const REFERENCE_ID = "ref-demo";
const VIDEO_ID = "vid-demo";

let workDir: string;
let projectDir: string;
let server: ChildProcess | null = null;
let baseUrl: string;
let api: ApiClient;

function cli(args: string[]): string {
  return execFileSync(PYTHON, ["-m", "restory.cli", ...args], {
    encoding: "utf-8",
  });
}

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        probe.close(() => reject(new Error("no port assigned")));
      }
    });
  });
}

async function waitForHealth(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${url}/api/health`);
      if (response.ok) {
        return;
      }
    } catch {
      // server not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`server at ${url} never became healthy`);
}

function manifestOnDisk(storyboardId: string): {
  status: string;
  edit_history: Array<{ kind: string; a: number; b: number }>;
  slots: Array<{ content_hash: string }>;
} {
  const path = join(
    projectDir,
    "store",
    "storyboards",
    storyboardId,
    "storyboard.json",
  );
  return JSON.parse(readFileSync(path, "utf-8"));
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "review-ui-"));
  projectDir = join(workDir, "proj");
  cli(["fixture", projectDir]);
  cli(["--config", projectDir, "generate", REFERENCE_ID, VIDEO_ID]);

  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    PYTHON,
    ["-m", "restory.cli", "--config", projectDir, "serve", "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealth(baseUrl);
  api = new ApiClient(baseUrl);
});

afterAll(() => {
  if (server) {
    server.kill("SIGTERM");
  }
  rmSync(workDir, { recursive: true, force: true });
});

describe("review board against the mock-provider server", () => {
  let controller: BoardController;
  let boardId: string;

  it("loads the fixture board with 5+5 thumbnails", async () => {
    const boards = await api.listStoryboards();
    const generated = boards.find((entry) => entry.kind !== "reference");
    expect(generated).toBeDefined();
    boardId = generated!.id;

    controller = new BoardController(api);
    await controller.loadBoard(boardId);

    const state = controller.state;
    expect(state.error).toBeNull();
    expect(state.reference?.slots).toHaveLength(5);
    expect(state.board?.slots).toHaveLength(5);
    expect(state.alignment?.slots).toHaveLength(5);
    expect(state.alpha).toBeCloseTo(0.2, 10);

    const html = renderBoardHtml(api, state);
    const imageCount = (html.match(/<img /g) ?? []).length;
    expect(imageCount).toBe(10);
    // ego-motion text flows between slots on both strips
    expect((html.match(/class="ego"/g) ?? []).length).toBeGreaterThanOrEqual(8);
  });

  it("surfaces an error banner for an unknown board, with no partial strip", async () => {
    const lost = new BoardController(api);
    await lost.loadBoard("sb-does-not-exist");
    expect(lost.state.error).toMatch(/404/);
    expect(lost.state.board).toBeNull();
    const html = renderBoardHtml(api, lost.state);
    expect(html).toContain("banner-error");
    expect(html).not.toContain("slot-card");
  });

  it("what-if at the same alpha highlights nothing", async () => {
    await controller.whatIf();
    expect(controller.state.whatIf?.changedSlots).toEqual([]);
  });

  it("what-if at alpha=1.0 highlights the designed slot-0 change", async () => {
    controller.setAlpha(1.0);
    await controller.whatIf();
    const changed = controller.state.whatIf?.changedSlots ?? [];
    expect(changed).toContain(0);

    const html = renderBoardHtml(api, controller.state);
    expect(html).toMatch(/data-strip="generated" data-slot="0"[^>]*/);
    const slot0 = html
      .split("\n")
      .find((line) => line.includes('data-strip="generated" data-slot="0"'));
    expect(slot0).toBeDefined();
    expect(slot0).toContain("changed");
    controller.setAlpha(0.2);
  });

  it("opens the candidate drawer with ranked alternatives", async () => {
    await controller.selectSlot(0);
    const candidates = controller.state.candidates ?? [];
    expect(candidates.length).toBeGreaterThan(0);
    expect(candidates.length).toBeLessThanOrEqual(5);
    const weights = candidates.map((c) => c.breakdown.weighted_sim);
    expect([...weights].sort((a, b) => b - a)).toEqual(weights);
    const html = renderBoardHtml(api, controller.state);
    expect(html).toContain("drawer");
    expect(html).toContain("bar-pose");
    await controller.selectSlot(null);
  });

  it("drag-swap round-trips through the server and persists to disk", async () => {
    const before = controller.state.board!;
    const hashBefore = before.slots.map((slot) => slot.content_hash);

    const done = await controller.swapSlots(1, 2);
    expect(done).toBe(true);

    const after = controller.state.board!;
    expect(after.version).toBe(1);
    expect(after.slots[1].content_hash).toBe(hashBefore[2]);
    expect(after.slots[2].content_hash).toBe(hashBefore[1]);

    const disk = manifestOnDisk(boardId);
    expect(disk.edit_history).toEqual([{ kind: "swap_slots", a: 1, b: 2 }]);
    expect(disk.slots.map((slot) => slot.content_hash)).toEqual(
      after.slots.map((slot) => slot.content_hash),
    );
  });

  it("a stale version token raises the conflict dialog", async () => {
    const stale = new BoardController(api);
    await stale.loadBoard(boardId);
    await controller.swapSlots(0, 1); // bumps the version under stale's feet
    const done = await stale.swapSlots(3, 4);
    expect(done).toBe(false);
    expect(stale.state.conflict).toBe(true);
    const html = renderBoardHtml(api, stale.state);
    expect(html).toContain("banner-conflict");
    await stale.reload();
    expect(stale.state.conflict).toBe(false);
    expect(stale.state.board?.version).toBe(controller.state.board?.version);
  });

  it("approve disables editing and offers export links", async () => {
    const done = await controller.approve();
    expect(done).toBe(true);
    expect(controller.state.board?.status).toBe("approved");
    expect(controller.editable).toBe(false);
    expect(controller.state.exportLinks?.manifest).toMatch(/storyboard\.json$/);

    const html = renderBoardHtml(api, controller.state);
    expect(html).toContain('data-action="approve" disabled');
    expect(html).not.toContain('draggable="true"');
    expect(manifestOnDisk(boardId).status).toBe("approved");

    const blocked = await controller.swapSlots(0, 1);
    expect(blocked).toBe(false);
  });
});
