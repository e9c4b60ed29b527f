import { ApiClient } from "./api.js";
import { BoardController } from "./board.js";
import { bindBoard, renderBoardHtml } from "./view.js";

async function pickBoard(api: ApiClient): Promise<string | null> {
  const boards = await api.listStoryboards();
  const fromHash = window.location.hash.slice(1);
  if (fromHash && boards.some((b) => b.id === fromHash)) {
    return fromHash;
  }
  const candidate = boards.find((b) => b.kind !== "reference");
  return candidate ? candidate.id : null;
}

async function start(): Promise<void> {
  const container = document.getElementById("board");
  if (!container) {
    return;
  }
  const api = new ApiClient("");
  const controller = new BoardController(api);
  controller.subscribe((state) => {
    container.innerHTML = renderBoardHtml(api, state);
  });
  bindBoard(container, controller);
  window.addEventListener("hashchange", () => {
    void pickBoard(api).then((id) => {
      if (id) {
        void controller.loadBoard(id);
      }
    });
  });

  const boardId = await pickBoard(api);
  if (boardId) {
    await controller.loadBoard(boardId);
  } else {
    container.innerHTML =
      '<p class="status">No generated storyboards yet. Run the pipeline first.</p>';
  }
}

void start();
