// Session state machine: one stimulus at a time, one in-flight submission
// at most, resumable after refresh. Submissions retry safely because the
// server rejects duplicates harmlessly (treated as recorded).

import { StudyApi, StimulusPayload } from "./api.js";

export type Phase = "idle" | "loading" | "answering" | "submitting" | "complete" | "error";

export interface ControllerState {
  phase: Phase;
  reader: string;
  stimulus: StimulusPayload | null;
  selectedChoice: number | null;
  answered: number;
  total: number;
  lastError: string | null;
}

export type Listener = (state: ControllerState) => void;

export class SessionController {
  private state_: ControllerState;
  private listeners: Listener[] = [];

  constructor(
    private readonly api: StudyApi,
    reader: string,
  ) {
    this.state_ = {
      phase: "idle",
      reader,
      stimulus: null,
      selectedChoice: null,
      answered: 0,
      total: 0,
      lastError: null,
    };
  }

  get state(): Readonly<ControllerState> {
    return this.state_;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private update(patch: Partial<ControllerState>): void {
    this.state_ = { ...this.state_, ...patch };
    for (const listener of this.listeners) {
      listener(this.state_);
    }
  }

  async start(): Promise<void> {
    this.update({ phase: "loading", lastError: null });
    try {
      const session = await this.api.session(this.state_.reader);
      this.update({ answered: session.answered, total: session.total });
      await this.advance();
    } catch (err) {
      this.update({ phase: "error", lastError: String(err) });
    }
  }

  select(choice: number): void {
    if (this.state_.phase !== "answering") {
      return;
    }
    if (!Number.isInteger(choice) || choice < 1 || choice > 6) {
      return;
    }
    this.update({ selectedChoice: choice });
  }

  canSubmit(): boolean {
    return this.state_.phase === "answering" && this.state_.selectedChoice !== null;
  }

  // Resolves to true when the session advanced (recorded or duplicate);
  // false when nothing was submitted (no selection, wrong phase, or a
  // network error left the same stimulus up for retry).
  async submit(): Promise<boolean> {
    if (!this.canSubmit() || this.state_.stimulus === null) {
      return false;
    }
    const { stimulus, selectedChoice } = this.state_;
    this.update({ phase: "submitting", lastError: null });
    try {
      const outcome = await this.api.submit(this.state_.reader, stimulus.id, selectedChoice!);
      if (outcome.status === "recorded") {
        this.update({ answered: outcome.answered });
      } else {
        const session = await this.api.session(this.state_.reader);
        this.update({ answered: session.answered });
      }
      await this.advance();
      return true;
    } catch (err) {
      // Leave the stimulus and the selection in place for a retry.
      this.update({ phase: "answering", lastError: String(err) });
      return false;
    }
  }

  private async advance(): Promise<void> {
    this.update({ phase: "loading", selectedChoice: null });
    try {
      const next = await this.api.next(this.state_.reader);
      if (next.done) {
        this.update({ phase: "complete", stimulus: null, total: next.total });
      } else {
        this.update({ phase: "answering", stimulus: next.stimulus, total: next.stimulus.total });
      }
    } catch (err) {
      this.update({ phase: "error", lastError: String(err) });
    }
  }
}
