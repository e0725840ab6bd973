// DOM layer: one mammogram beside the six-point certainty panel.
// Keyboard: digits 1-6 select, Enter submits. Images render as served
// (fit to pane, never upscaled); a failed load offers a retry without
// skipping the stimulus.

import { StudyApi } from "./api.js";
import { ControllerState, SessionController } from "./session.js";

export const CHOICE_LABELS: ReadonlyArray<string> = [
  "1 — Certainly synthetic",
  "2 — Probably synthetic",
  "3 — Possibly synthetic",
  "4 — Possibly real",
  "5 — Probably real",
  "6 — Certainly real",
];

export function initUi(root: HTMLElement, controller: SessionController, api: StudyApi): void {
  root.innerHTML = `
    <header class="bar">
      <span id="progress"></span>
      <span id="status"></span>
    </header>
    <main class="panes">
      <section class="image-pane">
        <img id="stimulus" alt="mammogram under assessment" draggable="false" />
        <div id="image-error" class="hidden">
          <p>Image failed to load.</p>
          <button id="retry-image" type="button">Retry</button>
        </div>
      </section>
      <aside class="choice-pane">
        <h2>Is this mammogram synthetic or real?</h2>
        <div id="choices"></div>
        <button id="submit" type="button" disabled>Submit (Enter)</button>
        <p id="error" class="error hidden"></p>
      </aside>
    </main>
    <section id="done" class="hidden">
      <h1>Session complete</h1>
      <p>All images assessed. Thank you; results stay blinded.</p>
    </section>`;

  const el = {
    progress: root.querySelector<HTMLSpanElement>("#progress")!,
    status: root.querySelector<HTMLSpanElement>("#status")!,
    image: root.querySelector<HTMLImageElement>("#stimulus")!,
    imageError: root.querySelector<HTMLDivElement>("#image-error")!,
    retryImage: root.querySelector<HTMLButtonElement>("#retry-image")!,
    choices: root.querySelector<HTMLDivElement>("#choices")!,
    submit: root.querySelector<HTMLButtonElement>("#submit")!,
    error: root.querySelector<HTMLParagraphElement>("#error")!,
    main: root.querySelector<HTMLElement>("main")!,
    done: root.querySelector<HTMLElement>("#done")!,
  };

  const choiceButtons: HTMLButtonElement[] = CHOICE_LABELS.map((label, i) => {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "choice";
    button.textContent = label;
    button.addEventListener("click", () => controller.select(i + 1));
    el.choices.appendChild(button);
    return button;
  });

  el.submit.addEventListener("click", () => void controller.submit());
  el.retryImage.addEventListener("click", () => {
    // cache-busting retry of the same stimulus
    const src = el.image.dataset.src!;
    el.imageError.classList.add("hidden");
    el.image.src = `${src}${src.includes("?") ? "&" : "?"}retry=${Date.now()}`;
  });
  el.image.addEventListener("error", () => {
    if (el.image.dataset.src) {
      el.imageError.classList.remove("hidden");
    }
  });
  el.image.addEventListener("load", () => el.imageError.classList.add("hidden"));

  document.addEventListener("keydown", (event) => {
    if (event.key >= "1" && event.key <= "6") {
      controller.select(Number(event.key));
    } else if (event.key === "Enter" && controller.canSubmit()) {
      event.preventDefault();
      void controller.submit();
    }
  });

  controller.subscribe((state: ControllerState) => {
    const inSession = state.phase === "answering" || state.phase === "submitting" || state.phase === "loading";
    el.main.classList.toggle("hidden", state.phase === "complete");
    el.done.classList.toggle("hidden", state.phase !== "complete");

    if (state.stimulus && inSession) {
      el.progress.textContent = `${state.stimulus.index}/${state.stimulus.total}`;
      const src = api.imageUrl(state.stimulus.image_url);
      if (el.image.dataset.src !== src) {
        el.image.dataset.src = src;
        el.image.src = src;
      }
    } else if (state.phase === "complete") {
      el.progress.textContent = `${state.total}/${state.total}`;
    }

    el.status.textContent = state.phase === "submitting" ? "saving…" : "";
    choiceButtons.forEach((button, i) => {
      button.classList.toggle("selected", state.selectedChoice === i + 1);
      button.disabled = state.phase !== "answering";
    });
    el.submit.disabled = !controller.canSubmit();
    el.error.textContent = state.lastError ?? "";
    el.error.classList.toggle("hidden", state.lastError === null);
  });
}
