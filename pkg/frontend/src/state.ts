// Wizard step gating. Mirrors the service's session state machine so the UI
// cannot request a step the backend would reject with 409.

export type SessionState = "created" | "ingested" | "matched" | "audited" | "resolved";

const STATE_RANK: Record<SessionState, number> = {
  created: 0,
  ingested: 1,
  matched: 2,
  audited: 3,
  resolved: 4,
};

// Minimum session state needed to *enter* each wizard step.
const STEP_REQUIREMENT: Record<number, SessionState> = {
  1: "created", // import
  2: "ingested", // matcher selection
  3: "matched", // fairness evaluation
  4: "audited", // resolution
};

export class WizardState {
  sessionState: SessionState = "created";
  step = 1;

  canEnter(step: number): boolean {
    const required = STEP_REQUIREMENT[step];
    if (!required) {
      return false;
    }
    return STATE_RANK[this.sessionState] >= STATE_RANK[required];
  }

  enter(step: number): boolean {
    if (!this.canEnter(step)) {
      return false;
    }
    this.step = step;
    return true;
  }

  observe(sessionState: SessionState): void {
    // states only move forward along the workflow
    if (STATE_RANK[sessionState] > STATE_RANK[this.sessionState]) {
      this.sessionState = sessionState;
    }
  }
}
