/** Thin DOM layer: maps the view model onto the page, nothing computed. */

import { Controller, ViewState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function render(root: HTMLElement, controller: Controller, s: ViewState): void {
  root.textContent = "";

  if (s.error) {
    const banner = el("div", "error-banner");
    banner.append(el("span", undefined, s.error));
    const retry = el("button", undefined, "Retry");
    retry.onclick = () => {
      if (s.userId !== null) void controller.loadSession(s.userId);
    };
    banner.append(retry);
    root.append(banner);
  }

  if (s.banner) {
    const banner = el("div", "pending-banner");
    banner.append(el("p", undefined, s.banner.text));
    const confirm = el("button", "confirm", "Confirm");
    confirm.disabled = s.busy;
    confirm.onclick = () => void controller.confirmPending();
    const undo = el("button", "undo", "Undo");
    undo.disabled = s.busy;
    undo.onclick = () => void controller.undoPending();
    banner.append(confirm, undo);
    root.append(banner);
  }

  const history = el("div", "history-strip");
  history.append(el("h2", undefined, "Your recent behaviors"));
  const strip = el("ul");
  for (const entry of s.history) {
    const item = el("li", entry.revoked ? "revoked" : undefined, entry.name);
    item.title = `position ${entry.position}`;
    strip.append(item);
  }
  history.append(strip);
  root.append(history);

  const list = el("div", "recommendations");
  list.append(el("h2", undefined, "Recommended for you"));
  const rows = el("ol");
  for (const row of s.rows) {
    const li = el("li");
    li.append(el("span", "rank", String(row.rank)));
    li.append(el("span", "name", row.name));
    const why = el("button", "why", "Why?");
    why.disabled = s.busy;
    why.onclick = () => void controller.openExplanation(row.item_id);
    const like = el("button", "like", "Interact");
    like.disabled = s.busy || s.banner !== null;
    like.onclick = () => void controller.previewInteraction(row.item_id);
    li.append(why, like);
    rows.append(li);
  }
  list.append(rows);
  root.append(list);

  if (s.panel) {
    const panel = el("div", "explanation-panel");
    panel.append(el("h2", undefined, `Why "${s.panel.targetName}"?`));
    panel.append(el("p", undefined, s.panel.text));
    if (s.panel.status === "success") {
      const choices = el("ul");
      for (const behavior of s.panel.behaviors) {
        const li = el("li");
        const box = el("input") as HTMLInputElement;
        box.type = "checkbox";
        box.checked = behavior.checked;
        box.onchange = () => controller.toggleBehavior(behavior.position);
        li.append(box, el("span", undefined, behavior.name));
        choices.append(li);
      }
      panel.append(choices);
      const revoke = el("button", "revoke", "Revoke selected");
      revoke.disabled = s.busy;
      revoke.onclick = () => void controller.revokeSelected();
      panel.append(revoke);
    } else if (s.panel.reason) {
      panel.append(el("p", "reason", s.panel.reason));
    }
    const close = el("button", "close", "Close");
    close.onclick = () => controller.closePanel();
    panel.append(close);
    root.append(panel);
  }
}
