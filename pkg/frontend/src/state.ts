/**
 * DOM-free controller. All mutations flow through the API; the view model
 * is rebuilt from API responses only, never predicted client-side. A single
 * in-flight guard serializes mutating requests, so double-clicks cannot
 * issue duplicates.
 */

import {
  AddedItem,
  ApiClient,
  ApiFailure,
  ExplanationPayload,
  HistoryEntry,
  RecommendationRow,
} from "./api.js";

export type Method = "search" | "relax";

export interface PanelBehavior {
  position: number;
  item_id: number;
  name: string;
  checked: boolean;
}

export interface ExplanationPanel {
  targetItem: number;
  targetName: string;
  status: "success" | "failure";
  text: string;
  reason: string | null;
  behaviors: PanelBehavior[];
}

export interface PendingBanner {
  pendingItem: number;
  added: AddedItem[];
  text: string;
}

export interface ViewState {
  sessionId: string | null;
  userId: number | null;
  rows: RecommendationRow[];
  history: HistoryEntry[];
  panel: ExplanationPanel | null;
  banner: PendingBanner | null;
  error: string | null;
  busy: boolean;
  method: Method;
}

const STORAGE_KEY = "ctrlrec.session";

export interface SessionStorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class Controller {
  readonly state: ViewState = {
    sessionId: null,
    userId: null,
    rows: [],
    history: [],
    panel: null,
    banner: null,
    error: null,
    busy: false,
    method: "search",
  };

  private listeners: Array<(s: ViewState) => void> = [];

  constructor(
    readonly api: ApiClient,
    private readonly storage: SessionStorageLike | null = null,
  ) {}

  onChange(listener: (s: ViewState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  private fail(err: unknown): void {
    this.state.error =
      err instanceof ApiFailure ? `${err.code}: ${err.message}` : String(err);
    this.emit();
  }

  /** Re-render everything from the server's view of the session. */
  private async refresh(): Promise<void> {
    if (!this.state.sessionId) return;
    const snapshot = await this.api.sessionState(this.state.sessionId);
    this.state.rows = snapshot.recommendations;
    this.state.history = snapshot.history;
    this.emit();
  }

  async loadSession(userId: number): Promise<void> {
    this.state.error = null;
    this.state.panel = null;
    this.state.banner = null;
    try {
      const created = await this.api.createSession(userId);
      this.state.sessionId = created.session_id;
      this.state.userId = created.user_id;
      this.state.rows = created.recommendations;
      this.state.history = created.history;
      this.storage?.setItem(
        STORAGE_KEY,
        JSON.stringify({ sessionId: created.session_id, userId: created.user_id }),
      );
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }

  /** Reattach to a stored session after a page refresh, if it still exists. */
  async resume(): Promise<boolean> {
    const raw = this.storage?.getItem(STORAGE_KEY);
    if (!raw) return false;
    try {
      const { sessionId, userId } = JSON.parse(raw);
      const snapshot = await this.api.sessionState(sessionId);
      this.state.sessionId = sessionId;
      this.state.userId = userId;
      this.state.rows = snapshot.recommendations;
      this.state.history = snapshot.history;
      this.state.error = null;
      this.emit();
      return true;
    } catch {
      this.storage?.removeItem(STORAGE_KEY);
      return false;
    }
  }

  setMethod(method: Method): void {
    this.state.method = method;
    this.emit();
  }

  async openExplanation(itemId: number): Promise<void> {
    if (!this.state.sessionId) return;
    this.state.error = null;
    try {
      const payload: ExplanationPayload = await this.api.explanation(
        this.state.sessionId,
        itemId,
        this.state.method,
      );
      const row = this.state.rows.find((r) => r.item_id === itemId);
      this.state.panel = {
        targetItem: itemId,
        targetName: row ? row.name : `Item ${itemId}`,
        status: payload.status,
        text: payload.text,
        reason: payload.reason,
        behaviors: payload.revocable.map((b) => ({ ...b, checked: true })),
      };
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }

  closePanel(): void {
    this.state.panel = null;
    this.emit();
  }

  toggleBehavior(position: number): void {
    const panel = this.state.panel;
    if (!panel) return;
    const behavior = panel.behaviors.find((b) => b.position === position);
    if (behavior) behavior.checked = !behavior.checked;
    this.emit();
  }

  /** Revoke the checked behaviors of the open panel; one request at a time. */
  async revokeSelected(): Promise<void> {
    const panel = this.state.panel;
    if (!panel || !this.state.sessionId || this.state.busy) return;
    const positions = panel.behaviors.filter((b) => b.checked).map((b) => b.position);
    if (positions.length === 0) return;
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      await this.api.revoke(this.state.sessionId, positions);
      this.state.panel = null;
      await this.refresh();
    } catch (err) {
      this.fail(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  async previewInteraction(itemId: number): Promise<void> {
    if (!this.state.sessionId || this.state.busy) return;
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      const payload = await this.api.interact(this.state.sessionId, itemId);
      this.state.banner = {
        pendingItem: payload.pending_item,
        added: payload.added_items,
        text: payload.text,
      };
      this.emit();
    } catch (err) {
      this.fail(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  async confirmPending(): Promise<void> {
    if (!this.state.sessionId || this.state.busy || !this.state.banner) return;
    this.state.busy = true;
    this.emit();
    try {
      await this.api.confirm(this.state.sessionId);
      this.state.banner = null;
      this.state.panel = null;
      await this.refresh();
    } catch (err) {
      this.fail(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  async undoPending(): Promise<void> {
    if (!this.state.sessionId || this.state.busy || !this.state.banner) return;
    this.state.busy = true;
    this.emit();
    try {
      await this.api.undo(this.state.sessionId);
      this.state.banner = null;
      await this.refresh();
    } catch (err) {
      this.fail(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }
}
