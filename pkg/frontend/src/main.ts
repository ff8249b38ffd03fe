/** Browser bootstrap: login form, render sink, click + keyboard wiring.
 * All state lives server-side; only the evaluator id persists locally. */

import { ReviewApiClient } from "./api.js";
import { keyToChoiceIndex } from "./keyboard.js";
import { choicesFor, renderDone, renderError, renderItem, renderLogin } from "./render.js";
import { SessionController } from "./session.js";
import type { JudgmentValue } from "./types.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
const app: HTMLElement = root;

let controller: SessionController | null = null;

function showLogin(): void {
  app.innerHTML = renderLogin();
  const evaluatorInput = document.getElementById("evaluator") as HTMLInputElement;
  evaluatorInput.value = localStorage.getItem("evaluator") ?? "";
  document.getElementById("start")?.addEventListener("click", () => {
    const evaluator = evaluatorInput.value.trim();
    const base = (document.getElementById("api-base") as HTMLInputElement).value.trim();
    if (!evaluator || !base) {
      return;
    }
    localStorage.setItem("evaluator", evaluator);
    startSession(base, evaluator);
  });
}

function startSession(base: string, evaluator: string): void {
  const api = new ReviewApiClient(base);
  controller = new SessionController(api, evaluator, (view) => {
    if (view.done) {
      app.innerHTML = renderDone(view.progress);
      return;
    }
    if (view.item && view.dimension) {
      const error = view.error ? renderError(view.error) : "";
      app.innerHTML = error + renderItem(view.item, view.dimension);
    }
  });
  controller.start().catch((err) => {
    app.innerHTML = renderError(`cannot reach the review API: ${err}`);
  });
}

app.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest("button.choice");
  if (target instanceof HTMLButtonElement && controller) {
    const value = JSON.parse(target.dataset["value"] ?? "{}") as JudgmentValue;
    void controller.choose(value);
  }
});

document.addEventListener("keydown", (event) => {
  if (!controller || (event.target as HTMLElement).tagName === "INPUT") {
    return;
  }
  const view = controller.view();
  if (!view.item || !view.dimension) {
    return;
  }
  const choices = choicesFor(view.item, view.dimension);
  const index = keyToChoiceIndex(event.key, choices.length);
  if (index !== null) {
    const choice = choices[index];
    if (choice) {
      void controller.choose(JSON.parse(choice.value) as JudgmentValue);
    }
  }
});

showLogin();
