// Controller: the full draw -> code -> submit loop against the API, with
// rendering delegated to a host (real DOM in the browser, a recorder in
// tests). The server owns all review state; reloading just replays reads.

import { ApiClient, ApiError } from "./api.js";
import { renderScreen } from "./render.js";
import {
  emptyDraft,
  initialState,
  setInterpretable,
  setVerdict,
  toggleCode,
  validateDraft,
  type ScreenState,
} from "./state.js";
import type { AnnotationOut } from "./types.js";

export interface Host {
  setHtml(html: string): void;
  readFreeCode(): string;
}

export class ReviewApp {
  state: ScreenState;

  constructor(
    private api: ApiClient,
    private host: Host,
    workflow: string,
    private annotator: string,
  ) {
    this.state = initialState(workflow);
  }

  render(): void {
    this.host.setHtml(renderScreen(this.state));
  }

  async init(): Promise<void> {
    this.state = initialState(this.state.workflow);
    this.render();
    await this.refresh();
  }

  async refresh(): Promise<void> {
    try {
      const saturation = await this.api.saturation(this.state.workflow);
      const target = await this.api.nextSample(this.state.workflow);
      if (target.exhausted) {
        this.state = { ...this.state, phase: "exhausted", target: null, saturation };
      } else {
        this.state = {
          ...this.state,
          phase: "review",
          target,
          saturation,
          draft: emptyDraft(),
          problems: [],
        };
      }
    } catch (err) {
      const message = err instanceof ApiError ? err.message : `server unreachable: ${err}`;
      this.state = { ...this.state, phase: "error", message };
    }
    this.render();
  }

  async handleAction(action: string, data: Record<string, string>): Promise<void> {
    switch (action) {
      case "toggle-code":
        this.state = { ...this.state, draft: toggleCode(this.state.draft, data.code ?? "") };
        break;
      case "add-code": {
        const code = this.host.readFreeCode().trim().toLowerCase().replaceAll(/\s+/g, "_");
        if (code) {
          if (!this.state.extraCodes.includes(code)) {
            this.state = { ...this.state, extraCodes: [...this.state.extraCodes, code] };
          }
          this.state = { ...this.state, draft: toggleCode(this.state.draft, code) };
        }
        break;
      }
      case "set-interpretable":
        this.state = {
          ...this.state,
          draft: setInterpretable(this.state.draft, data.value === "yes"),
        };
        break;
      case "set-verdict": {
        const verdict = data.verdict === "tp" ? "tp" : "fp";
        this.state = {
          ...this.state,
          draft: setVerdict(this.state.draft, this.state.draft.verdict === verdict ? null : verdict),
        };
        break;
      }
      case "submit":
        await this.submit();
        return;
      case "retry":
        await this.refresh();
        return;
    }
    this.render();
  }

  async submit(): Promise<void> {
    const problems = validateDraft(this.state.draft);
    if (problems.length > 0) {
      this.state = { ...this.state, problems };
      this.render();
      return;
    }
    const target = this.state.target?.target_id;
    if (!target) return;
    const annotation: AnnotationOut = {
      workflow: this.state.workflow,
      annotator: this.annotator,
      target,
      codes: this.state.draft.codes,
      interpretable: this.state.draft.interpretable === true,
      verdict: this.state.draft.verdict,
    };
    try {
      const response = await this.api.submit(annotation);
      this.state = { ...this.state, saturation: response.saturation };
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.state = { ...this.state, problems: ["this target was already annotated"] };
        this.render();
        return;
      }
      const message = err instanceof ApiError ? err.message : `server unreachable: ${err}`;
      this.state = { ...this.state, phase: "error", message };
      this.render();
    }
  }
}
