import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { BoardState } from "../src/board.js";
import { renderBoardHtml } from "../src/view.js";
import { Breakdown, StoryboardDoc } from "../src/types.js";

const api = new ApiClient("http://example.test");

function breakdown(pose: number, context: number, alpha = 0.2): Breakdown {
  return {
    pose_sim: pose,
    context_sim: context,
    weighted_sim: alpha * pose + (1 - alpha) * context,
    alpha,
  };
}

function board(
  id: string,
  kind: StoryboardDoc["kind"],
  slotCount: number,
  status: StoryboardDoc["status"] = "draft",
): StoryboardDoc {
  return {
    id,
    kind,
    status,
    reference_storyboard_id: kind === "reference" ? null : "ref-x",
    input_video_id: kind === "reference" ? null : "vid-x",
    config_digest: kind === "reference" ? null : "abc",
    ego_motion_policy: "copy_reference",
    slots: Array.from({ length: slotCount }, (_, index) => ({
      slot_index: index,
      image: `videos/vid-x/f${index}.png`,
      content_hash: `hash-${id}-${index}`,
      pose_caption: `pose ${index}`,
      context_caption: `context ${index}`,
      ego_motion_to_next: index === slotCount - 1 ? null : "robot rolls on",
      breakdown: kind === "reference" ? null : breakdown(0.123456, 0.654321),
    })),
    edit_history: [],
    version: 0,
    alignment_id: kind === "reference" ? null : "al-x",
  };
}

function state(partial: Partial<BoardState>): BoardState {
  return {
    loading: false,
    error: null,
    conflict: false,
    board: null,
    reference: null,
    alignment: null,
    alignmentId: null,
    whatIf: null,
    selectedSlot: null,
    candidates: null,
    alpha: 0.2,
    strategy: "greedy",
    exportLinks: null,
    ...partial,
  };
}

function loaded(overrides: Partial<BoardState> = {}): BoardState {
  return state({
    board: board("sb-1", "generated", 5),
    reference: board("ref-x", "reference", 5),
    alignmentId: "al-x",
    ...overrides,
  });
}

describe("renderBoardHtml", () => {
  it("renders both strips with equal slot counts and ego text", () => {
    const html = renderBoardHtml(api, loaded());
    expect((html.match(/<img /g) ?? []).length).toBe(10);
    expect((html.match(/data-strip="reference"/g) ?? []).length).toBe(5);
    expect((html.match(/data-strip="generated"/g) ?? []).length).toBe(5);
    expect((html.match(/robot rolls on/g) ?? []).length).toBe(8);
  });

  it("shows similarity badges rounded to four decimals", () => {
    const html = renderBoardHtml(api, loaded());
    expect(html).toContain("p 0.1235");
    expect(html).toContain("c 0.6543");
    expect(html).toContain(`w ${(0.2 * 0.123456 + 0.8 * 0.654321).toFixed(4)}`);
  });

  it("highlights what-if changed slots only", () => {
    const html = renderBoardHtml(
      api,
      loaded({
        whatIf: {
          alignmentId: "al-x-r0",
          alpha: 1,
          strategy: "greedy",
          changedSlots: [0, 3],
          reordered: false,
        },
      }),
    );
    const changed = html
      .split("\n")
      .filter((line) => line.includes("changed") && line.includes("generated"));
    expect(changed.some((line) => line.includes('data-slot="0"'))).toBe(true);
    expect(changed.some((line) => line.includes('data-slot="3"'))).toBe(true);
    expect(changed.some((line) => line.includes('data-slot="1"'))).toBe(false);
  });

  it("renders the candidate drawer with stacked bars", () => {
    const html = renderBoardHtml(
      api,
      loaded({
        selectedSlot: 2,
        candidates: [
          { frame_index: 7, content_hash: "hash-c7", breakdown: breakdown(0.5, 0.8) },
          { frame_index: 1, content_hash: "hash-c1", breakdown: breakdown(0.2, 0.4) },
        ],
      }),
    );
    expect(html).toContain("Alternatives for slot 2");
    expect(html).toContain('data-candidate="7"');
    expect((html.match(/bar-pose/g) ?? []).length).toBe(2);
    expect(html).toContain("/media/hash-c7");
  });

  it("disables editing once approved", () => {
    const approvedBoard = board("sb-1", "curated", 5, "approved");
    const html = renderBoardHtml(api, loaded({ board: approvedBoard }));
    expect(html).toContain('data-action="approve" disabled');
    expect(html).not.toContain('draggable="true"');
    expect(html).toContain("chip-approved");
  });

  it("keeps drag enabled on drafts", () => {
    const html = renderBoardHtml(api, loaded());
    expect((html.match(/draggable="true"/g) ?? []).length).toBe(5);
  });

  it("shows banners for errors and conflicts without partial strips", () => {
    const errored = renderBoardHtml(api, state({ error: "404: no storyboard" }));
    expect(errored).toContain("banner-error");
    expect(errored).not.toContain("slot-card");

    const conflicted = renderBoardHtml(api, loaded({ conflict: true }));
    expect(conflicted).toContain("banner-conflict");
    expect(conflicted).toContain('data-action="reload"');
  });

  it("escapes caption text", () => {
    const doc = board("sb-1", "generated", 1);
    doc.slots[0].pose_caption = '<script>alert("x")</script>';
    const html = renderBoardHtml(
      api,
      loaded({ board: doc, reference: board("ref-x", "reference", 1) }),
    );
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});
