// Tuner state machine: a parameter draft the user edits, the last
// segmentation response the overlay is allowed to show, and the request
// discipline between them (300 ms debounce, single in-flight request,
// latest wins). The overlay never reflects an unsent draft.

import { ApiError, TunerApi } from "./api.js";
import { DEFAULT_PARAMS, sameParams } from "./types.js";
import type { PageSegmentation, SegParams } from "./types.js";

export const DEBOUNCE_MS = 300;

export interface TunerState {
  imageId: string | null;
  draft: SegParams;
  lastResponse: PageSegmentation | null;
  dirty: boolean; // draft differs from the params of lastResponse
  banner: string | null;
  fieldErrors: Record<string, string>;
  inFlight: boolean;
}

type Scheduler = (fn: () => void, ms: number) => unknown;
type Canceller = (handle: unknown) => void;

export class TunerController {
  readonly api: TunerApi;
  state: TunerState;
  private listeners: Array<(s: TunerState) => void> = [];
  private timer: unknown = null;
  private schedule: Scheduler;
  private cancel: Canceller;
  private abort: AbortController | null = null;
  private requestSeq = 0;

  constructor(
    api: TunerApi,
    schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
    cancel: Canceller = (h) => clearTimeout(h as number),
  ) {
    this.api = api;
    this.schedule = schedule;
    this.cancel = cancel;
    this.state = {
      imageId: null,
      draft: { ...DEFAULT_PARAMS },
      lastResponse: null,
      dirty: false,
      banner: null,
      fieldErrors: {},
      inFlight: false,
    };
  }

  onChange(listener: (s: TunerState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  private patch(partial: Partial<TunerState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  async selectImage(imageId: string): Promise<void> {
    this.patch({ imageId, lastResponse: null, dirty: false });
    await this.sendNow();
  }

  setDraft(params: SegParams): void {
    this.patch({ draft: { ...params } });
  }

  /** A parameter edit: re-segment after the debounce window unless the
   * draft already matches the shown response. */
  adjust<K extends keyof SegParams>(field: K, value: SegParams[K]): void {
    const draft = { ...this.state.draft, [field]: value };
    const shown = this.state.lastResponse;
    this.patch({ draft, fieldErrors: {} });
    if (shown && sameParams(draft, shown.params)) {
      this.cancelPending(); // edited back to what is on screen
      this.patch({ dirty: false });
      return;
    }
    this.patch({ dirty: true });
    this.cancelPending();
    this.timer = this.schedule(() => {
      this.timer = null;
      void this.sendNow();
    }, DEBOUNCE_MS);
  }

  /** The Apply button: bypass the debounce. */
  async apply(): Promise<void> {
    this.cancelPending();
    await this.sendNow();
  }

  private cancelPending(): void {
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
  }

  async sendNow(): Promise<void> {
    const imageId = this.state.imageId;
    if (!imageId) return;
    if (this.abort) this.abort.abort(); // latest wins
    const controller = new AbortController();
    this.abort = controller;
    const seq = ++this.requestSeq;
    const params = { ...this.state.draft };
    this.patch({ inFlight: true });
    try {
      const doc = await this.api.segment(imageId, params, controller.signal);
      if (seq !== this.requestSeq) return; // a newer request superseded us
      this.patch({
        lastResponse: doc,
        dirty: !sameParams(this.state.draft, doc.params),
        banner: null,
        fieldErrors: {},
        inFlight: false,
      });
    } catch (err) {
      if (controller.signal.aborted || seq !== this.requestSeq) return;
      if (err instanceof ApiError) {
        // prior overlay is retained; surface the failure
        this.patch({
          banner: `segmentation failed (${err.status})`,
          fieldErrors: err.fieldErrors,
          inFlight: false,
        });
      } else {
        this.patch({
          banner: `segmentation failed (${String(err)})`,
          inFlight: false,
        });
      }
    }
  }

  /** Current params as the server stores them: PUT the draft, then GET it
   * back; the export must be byte-identical to a later GET. */
  async exportParams(): Promise<string> {
    await this.api.putParams(this.state.draft);
    const stored = await this.api.getParams();
    return JSON.stringify(stored, Object.keys(stored).sort(), 2) + "\n";
  }
}
