// Task timer: measures how long the operator takes to drive the elbow to a
// target angle, in telemetry time (t_step * 50 ms) so results are exact and
// reproducible in fast-mode runs.

import { TelemetryFrame } from './protocol.js';
import { STEP_S } from './state.js';

export type TaskTarget = 'flex-to-120' | 'extend-to-10';

export const TARGET_ANGLE: Record<TaskTarget, number> = {
  'flex-to-120': 120,
  'extend-to-10': 10,
};

export type TimerState =
  | { phase: 'idle' }
  | { phase: 'running'; target: TaskTarget; startStep: number }
  | { phase: 'done'; target: TaskTarget; elapsedS: number }
  | { phase: 'aborted'; target: TaskTarget; reason: string };

export class TaskTimer {
  state: TimerState = { phase: 'idle' };

  // Starting requires a frame so the already-past-target case resolves to
  // 0.0 s immediately instead of waiting for the next crossing.
  start(target: TaskTarget, frame: TelemetryFrame): TimerState {
    if (crossed(target, frame.elbow_angle_deg)) {
      this.state = { phase: 'done', target, elapsedS: 0.0 };
    } else {
      this.state = { phase: 'running', target, startStep: frame.t_step };
    }
    return this.state;
  }

  onFrame(frame: TelemetryFrame): TimerState {
    if (this.state.phase !== 'running') return this.state;
    if (crossed(this.state.target, frame.elbow_angle_deg)) {
      const elapsed = (frame.t_step - this.state.startStep) * STEP_S;
      this.state = {
        phase: 'done',
        target: this.state.target,
        elapsedS: roundTenth(elapsed),
      };
    }
    return this.state;
  }

  onDisconnect(): TimerState {
    if (this.state.phase === 'running') {
      this.state = {
        phase: 'aborted',
        target: this.state.target,
        reason: 'connection lost mid-task',
      };
    }
    return this.state;
  }

  reset(): void {
    this.state = { phase: 'idle' };
  }
}

function crossed(target: TaskTarget, angleDeg: number): boolean {
  return target === 'flex-to-120'
    ? angleDeg >= TARGET_ANGLE[target]
    : angleDeg <= TARGET_ANGLE[target];
}

function roundTenth(v: number): number {
  return Math.round(v * 10) / 10;
}
