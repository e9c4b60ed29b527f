import { ApiClient } from "./api.js";
import { BoardController, BoardState } from "./board.js";
import { Breakdown, SlotDoc, StoryboardDoc } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function badge(breakdown: Breakdown | null): string {
  if (!breakdown) {
    return "";
  }
  const p = breakdown.pose_sim.toFixed(4);
  const c = breakdown.context_sim.toFixed(4);
  const w = breakdown.weighted_sim.toFixed(4);
  return `<div class="badges">
    <span class="badge" title="pose similarity">p ${p}</span>
    <span class="badge" title="context similarity">c ${c}</span>
    <span class="badge badge-weighted" title="weighted similarity">w ${w}</span>
  </div>`;
}

/** Stacked bar: alpha-weighted pose share vs context share of the total. */
function stackedBar(breakdown: Breakdown): string {
  const poseShare = Math.max(0, breakdown.alpha * breakdown.pose_sim);
  const contextShare = Math.max(0, (1 - breakdown.alpha) * breakdown.context_sim);
  const posePct = Math.min(100, poseShare * 100);
  const contextPct = Math.min(100 - posePct, contextShare * 100);
  return `<div class="bar" title="α·pose ${poseShare.toFixed(4)} + (1−α)·context ${contextShare.toFixed(4)}">
    <span class="bar-pose" style="width:${posePct.toFixed(1)}%"></span>
    <span class="bar-context" style="width:${contextPct.toFixed(1)}%"></span>
  </div>`;
}

function slotCard(
  api: ApiClient,
  slot: SlotDoc,
  options: {
    strip: "reference" | "generated";
    draggable: boolean;
    highlighted: boolean;
    selected: boolean;
  },
): string {
  const classes = ["slot-card", `strip-${options.strip}`];
  if (options.highlighted) {
    classes.push("changed");
  }
  if (options.selected) {
    classes.push("selected");
  }
  const drag = options.draggable ? ' draggable="true"' : ' draggable="false"';
  return `<div class="${classes.join(" ")}" data-strip="${options.strip}" data-slot="${slot.slot_index}"${drag}>
    <img src="${api.mediaUrl(slot.content_hash)}" alt="${options.strip} slot ${slot.slot_index}">
    <div class="captions">
      <p class="pose">${esc(slot.pose_caption)}</p>
      <p class="context">${esc(slot.context_caption)}</p>
    </div>
    ${badge(slot.breakdown)}
  </div>`;
}

function strip(
  api: ApiClient,
  board: StoryboardDoc,
  options: {
    strip: "reference" | "generated";
    draggable: boolean;
    highlights: Set<number>;
    selected: number | null;
  },
): string {
  const cells: string[] = [];
  for (const slot of board.slots) {
    cells.push(
      slotCard(api, slot, {
        strip: options.strip,
        draggable: options.draggable,
        highlighted: options.highlights.has(slot.slot_index),
        selected: options.selected === slot.slot_index,
      }),
    );
    if (slot.ego_motion_to_next) {
      cells.push(`<div class="ego">→ ${esc(slot.ego_motion_to_next)}</div>`);
    } else if (slot.slot_index < board.slots.length - 1) {
      cells.push('<div class="ego ego-empty"></div>');
    }
  }
  return `<div class="strip" data-strip-kind="${options.strip}">${cells.join("")}</div>`;
}

function drawer(api: ApiClient, state: BoardState): string {
  if (state.selectedSlot === null || !state.candidates) {
    return "";
  }
  const rows = state.candidates
    .map((candidate) => {
      const thumb = candidate.content_hash
        ? `<img src="${api.mediaUrl(candidate.content_hash)}" alt="frame ${candidate.frame_index}">`
        : '<span class="no-thumb">?</span>';
      return `<div class="candidate" data-candidate="${candidate.frame_index}">
        ${thumb}
        <span class="cand-label">frame ${candidate.frame_index} · w ${candidate.breakdown.weighted_sim.toFixed(4)}</span>
        ${stackedBar(candidate.breakdown)}
      </div>`;
    })
    .join("");
  return `<aside class="drawer" data-drawer-slot="${state.selectedSlot}">
    <h3>Alternatives for slot ${state.selectedSlot}</h3>
    ${rows}
    <button type="button" data-action="close-drawer">Close</button>
  </aside>`;
}

export function renderBoardHtml(api: ApiClient, state: BoardState): string {
  if (state.loading) {
    return '<p class="status">Loading board…</p>';
  }
  const parts: string[] = [];
  if (state.error) {
    parts.push(`<div class="banner banner-error">${esc(state.error)}</div>`);
  }
  if (state.conflict) {
    parts.push(
      `<div class="banner banner-conflict">This storyboard changed elsewhere.
       <button type="button" data-action="reload">Reload</button></div>`,
    );
  }
  if (!state.board || !state.reference) {
    if (!state.error) {
      parts.push('<p class="status">No board loaded.</p>');
    }
    return parts.join("\n");
  }

  const approved = state.board.status === "approved";
  const editable = !approved && !state.conflict;
  const highlights = new Set(state.whatIf ? state.whatIf.changedSlots : []);

  parts.push(`<header class="board-header">
    <h2>${esc(state.board.id)}</h2>
    <span class="chip chip-${state.board.status}">${state.board.status}</span>
    <span class="meta">version ${state.board.version}</span>
  </header>`);

  parts.push('<h3 class="strip-title">Reference</h3>');
  parts.push(
    strip(api, state.reference, {
      strip: "reference",
      draggable: false,
      highlights: new Set(),
      selected: null,
    }),
  );
  parts.push('<h3 class="strip-title">Generated</h3>');
  parts.push(
    strip(api, state.board, {
      strip: "generated",
      draggable: editable,
      highlights,
      selected: state.selectedSlot,
    }),
  );

  const reorderNote =
    state.whatIf && state.whatIf.reordered
      ? '<span class="reorder-note">monotone order would re-arrange the highlighted slots</span>'
      : "";
  parts.push(`<section class="controls">
    <label>α
      <input type="range" min="0" max="1" step="0.05" value="${state.alpha}" data-control="alpha">
      <span class="alpha-value">${state.alpha.toFixed(2)}</span>
    </label>
    <label>strategy
      <select data-control="strategy">
        <option value="greedy"${state.strategy === "greedy" ? " selected" : ""}>greedy</option>
        <option value="monotone"${state.strategy === "monotone" ? " selected" : ""}>monotone</option>
      </select>
    </label>
    <button type="button" data-action="what-if">What if?</button>
    <button type="button" data-action="approve"${approved ? " disabled" : ""}>Approve</button>
    ${reorderNote}
  </section>`);

  if (state.exportLinks) {
    parts.push(`<section class="exports">
      exported: <code>${esc(state.exportLinks.manifest)}</code>
      and <code>${esc(state.exportLinks.html)}</code>
    </section>`);
  }

  parts.push(drawer(api, state));
  return parts.join("\n");
}

/** Wire pointer and drag events onto a rendered board container. */
export function bindBoard(
  container: HTMLElement,
  controller: BoardController,
): void {
  let dragFrom: number | null = null;

  container.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const action = target.closest<HTMLElement>("[data-action]")?.dataset.action;
    if (action === "reload") {
      void controller.reload();
      return;
    }
    if (action === "what-if") {
      void controller.whatIf();
      return;
    }
    if (action === "approve") {
      void controller.approve();
      return;
    }
    if (action === "close-drawer") {
      void controller.selectSlot(null);
      return;
    }
    const candidate = target.closest<HTMLElement>("[data-candidate]");
    if (candidate && controller.state.selectedSlot !== null) {
      void controller.replaceFrame(
        controller.state.selectedSlot,
        Number(candidate.dataset.candidate),
      );
      return;
    }
    const card = target.closest<HTMLElement>('[data-strip="generated"]');
    if (card) {
      void controller.selectSlot(Number(card.dataset.slot));
    }
  });

  container.addEventListener("input", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.control === "alpha") {
      controller.setAlpha(Number((target as HTMLInputElement).value));
    } else if (target.dataset.control === "strategy") {
      controller.setStrategy(
        (target as HTMLSelectElement).value as "greedy" | "monotone",
      );
    }
  });

  container.addEventListener("dragstart", (event) => {
    const card = (event.target as HTMLElement).closest<HTMLElement>(
      '[data-strip="generated"]',
    );
    dragFrom = card ? Number(card.dataset.slot) : null;
  });

  container.addEventListener("dragover", (event) => {
    if (dragFrom !== null) {
      event.preventDefault();
    }
  });

  container.addEventListener("drop", (event) => {
    const card = (event.target as HTMLElement).closest<HTMLElement>(
      '[data-strip="generated"]',
    );
    if (card && dragFrom !== null) {
      event.preventDefault();
      void controller.swapSlots(dragFrom, Number(card.dataset.slot));
    }
    dragFrom = null;
  });
}
