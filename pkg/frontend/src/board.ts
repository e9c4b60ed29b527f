import { ApiClient } from "./api.js";
import {
  AlignmentDoc,
  ApiRequestError,
  CandidateEntry,
  ExportResult,
  StoryboardDoc,
} from "./types.js";

export interface WhatIfView {
  alignmentId: string;
  alpha: number;
  strategy: string;
  /** Slots whose chosen frame differs from the board's base alignment. */
  changedSlots: number[];
  reordered: boolean;
}

export interface BoardState {
  loading: boolean;
  error: string | null;
  conflict: boolean;
  board: StoryboardDoc | null;
  reference: StoryboardDoc | null;
  alignment: AlignmentDoc | null;
  alignmentId: string | null;
  whatIf: WhatIfView | null;
  selectedSlot: number | null;
  candidates: CandidateEntry[] | null;
  alpha: number;
  strategy: "greedy" | "monotone";
  exportLinks: ExportResult | null;
}

function initialState(): BoardState {
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
  };
}

export type Listener = (state: BoardState) => void;

/**
 * Holds the review board's client state. Every mutation round-trips through
 * the server and refetches the storyboard, so the rendered board can never
 * diverge from what is persisted.
 */
export class BoardController {
  state: BoardState = initialState();
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private patch(partial: Partial<BoardState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  get editable(): boolean {
    const board = this.state.board;
    return board !== null && board.status !== "approved" && !this.state.conflict;
  }

  async loadBoard(storyboardId: string): Promise<void> {
    this.state = { ...initialState(), loading: true };
    this.emit();
    try {
      const board = await this.api.getStoryboard(storyboardId);
      const reference = board.reference_storyboard_id
        ? await this.api.getStoryboard(board.reference_storyboard_id)
        : null;
      let alignment: AlignmentDoc | null = null;
      if (board.alignment_id) {
        alignment = (await this.api.getAlignment(board.alignment_id)).alignment;
      }
      this.patch({
        loading: false,
        board,
        reference,
        alignment,
        alignmentId: board.alignment_id,
        alpha: alignment ? alignment.config.alpha : 0.2,
        strategy: alignment ? alignment.config.strategy : "greedy",
      });
    } catch (error) {
      // no partial board on failure
      this.state = initialState();
      this.patch({ error: describe(error) });
    }
  }

  async reload(): Promise<void> {
    const id = this.state.board?.id;
    if (id) {
      await this.loadBoard(id);
    }
  }

  setAlpha(alpha: number): void {
    this.patch({ alpha });
  }

  setStrategy(strategy: "greedy" | "monotone"): void {
    this.patch({ strategy });
  }

  /** Re-run alignment with the slider/toggle values and highlight changes. */
  async whatIf(): Promise<void> {
    const { alignmentId, alignment } = this.state;
    if (!alignmentId || !alignment) {
      return;
    }
    try {
      const envelope = await this.api.recompute(alignmentId, {
        alpha: this.state.alpha,
        strategy: this.state.strategy,
      });
      const base = alignment.slots.map((slot) => slot.chosen_frame_index);
      const next = envelope.alignment.slots.map((slot) => slot.chosen_frame_index);
      const changedSlots = next
        .map((frame, index) => (frame !== base[index] ? index : -1))
        .filter((index) => index >= 0);
      this.patch({
        error: null,
        whatIf: {
          alignmentId: envelope.alignment_id,
          alpha: envelope.alignment.config.alpha,
          strategy: envelope.alignment.config.strategy,
          changedSlots,
          reordered: changedSlots.length > 0 && this.state.strategy === "monotone",
        },
      });
    } catch (error) {
      this.patch({ error: describe(error) });
    }
  }

  async selectSlot(slotIndex: number | null): Promise<void> {
    if (slotIndex === null || !this.state.alignmentId) {
      this.patch({ selectedSlot: null, candidates: null });
      return;
    }
    try {
      const entries = await this.api.candidates(this.state.alignmentId, slotIndex);
      this.patch({ selectedSlot: slotIndex, candidates: entries });
    } catch (error) {
      this.patch({ error: describe(error) });
    }
  }

  private async mutate(edit: {
    kind: "swap_slots" | "replace_frame" | "approve";
    a?: number;
    b?: number;
  }): Promise<boolean> {
    const board = this.state.board;
    if (!board || !this.editable) {
      return false;
    }
    try {
      await this.api.submitEdit(board.id, { ...edit, version: board.version });
    } catch (error) {
      if (error instanceof ApiRequestError && error.status === 409) {
        this.patch({ conflict: true });
        return false;
      }
      this.patch({ error: describe(error) });
      return false;
    }
    // server is the source of truth: refetch rather than patching locally
    const refreshed = await this.api.getStoryboard(board.id);
    this.patch({ board: refreshed, error: null });
    return true;
  }

  async swapSlots(a: number, b: number): Promise<boolean> {
    if (a === b) {
      return false;
    }
    return this.mutate({ kind: "swap_slots", a, b });
  }

  async replaceFrame(slotIndex: number, frameIndex: number): Promise<boolean> {
    const done = await this.mutate({
      kind: "replace_frame",
      a: slotIndex,
      b: frameIndex,
    });
    if (done) {
      await this.selectSlot(null);
    }
    return done;
  }

  async approve(): Promise<boolean> {
    const done = await this.mutate({ kind: "approve" });
    if (done && this.state.board) {
      const links = await this.api.exportStoryboard(this.state.board.id);
      this.patch({ exportLinks: links });
    }
    return done;
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiRequestError) {
    return `${error.status}: ${error.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}
