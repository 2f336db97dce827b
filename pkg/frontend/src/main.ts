import { ApiClient } from "./api.js";
import { Controller, Method } from "./state.js";
import { render } from "./render.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? "";
}

function bootstrap(): void {
  const root = document.getElementById("app");
  const userInput = document.getElementById("user-id") as HTMLInputElement;
  const loadButton = document.getElementById("load") as HTMLButtonElement;
  const methodSelect = document.getElementById("method") as HTMLSelectElement;
  if (!root || !userInput || !loadButton || !methodSelect) {
    throw new Error("panel markup missing");
  }

  const api = new ApiClient(apiBase());
  const controller = new Controller(api, window.localStorage);
  controller.onChange((s) => render(root, controller, s));

  loadButton.onclick = () => {
    const userId = Number.parseInt(userInput.value, 10);
    if (Number.isFinite(userId)) void controller.loadSession(userId);
  };
  methodSelect.onchange = () => {
    controller.setMethod(methodSelect.value as Method);
  };

  void controller.resume();
}

bootstrap();
