// UI state lives here as a pure reducer so it can be tested without a DOM.
// Render state derives only from received frames plus the local task timer.

import { TelemetryFrame } from './protocol.js';

export const STEP_S = 0.05; // one telemetry frame per 50 ms chunk
export const HISTORY_S = 10;
export const HISTORY_STEPS = Math.round(HISTORY_S / STEP_S);

export type ConnectionStatus = 'connecting' | 'open' | 'closed';

export interface HistoryPoint {
  t_step: number;
  envelope: number;
  direction: TelemetryFrame['direction'];
}

export interface UiState {
  status: ConnectionStatus;
  latest: TelemetryFrame | null;
  history: HistoryPoint[];
}

export function initialState(): UiState {
  return { status: 'connecting', latest: null, history: [] };
}

export function onStatus(state: UiState, status: ConnectionStatus): UiState {
  return { ...state, status };
}

// Keep a rolling window of envelope/direction samples; frames may arrive with
// gaps (the server drops telemetry under back-pressure), so we trim by t_step
// rather than by element count.
export function onFrame(state: UiState, frame: TelemetryFrame): UiState {
  const channel = bestChannel(frame);
  const point: HistoryPoint = {
    t_step: frame.t_step,
    envelope: frame.pred_envelope[channel] ?? 0,
    direction: frame.direction,
  };
  const cutoff = frame.t_step - HISTORY_STEPS;
  const history = state.history
    .filter((p) => p.t_step > cutoff && p.t_step < frame.t_step)
    .concat(point);
  return { ...state, latest: frame, history };
}

function bestChannel(frame: TelemetryFrame): number {
  let best = 0;
  for (let i = 1; i < frame.pred_envelope.length; i++) {
    if (frame.pred_envelope[i] > frame.pred_envelope[best]) best = i;
  }
  return best;
}
