import { StudyApi } from "./api.js";
import { SessionController } from "./session.js";
import { initUi } from "./ui.js";

function readerId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("reader");
  if (fromQuery) {
    return fromQuery;
  }
  const entered = window.prompt("Reader id:")?.trim();
  if (!entered) {
    throw new Error("a reader id is required");
  }
  window.location.search = `?reader=${encodeURIComponent(entered)}`;
  return entered;
}

const api = new StudyApi("");
const controller = new SessionController(api, readerId());
initUi(document.getElementById("app")!, controller, api);
void controller.start();
