// Message types for the "bmui-ws/1" wire protocol, plus hand-rolled
// validation: frames come off a socket, so nothing about their shape can be
// trusted at compile time.

export const SCHEMA = 'bmui-ws/1';

export interface TelemetryFrame {
  t_step: number;
  elbow_angle_deg: number;
  direction: 'flex' | 'extend' | 'rest';
  magnitude: number;
  pred_envelope: number[];
  eeg_preview: number[][];
  processing_latency_ms: number;
}

export interface Reply {
  type: 'ack' | 'err';
  detail: string;
}

export type ServerMessage =
  | { kind: 'telemetry'; frame: TelemetryFrame }
  | { kind: 'reply'; reply: Reply };

export type ControlMessage =
  | { type: 'set_gain'; value: number }
  | { type: 'set_threshold_fraction'; value: number }
  | { type: 'intent'; direction: string; level: number }
  | { type: 'set_source'; value: string }
  | { type: 'reset_arm' }
  | { type: 'start' }
  | { type: 'stop' };

function isFiniteNumber(v: unknown): v is number {
  return typeof v === 'number' && Number.isFinite(v);
}

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every(isFiniteNumber);
}

export function parseMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new Error('not valid JSON');
  }
  if (typeof data !== 'object' || data === null) {
    throw new Error('message is not an object');
  }
  const msg = data as Record<string, unknown>;

  if (msg.type === 'ack' || msg.type === 'err') {
    return {
      kind: 'reply',
      reply: { type: msg.type, detail: String(msg.detail ?? '') },
    };
  }

  if (msg.type !== 'telemetry') {
    throw new Error(`unknown message type: ${String(msg.type)}`);
  }
  if (msg.schema !== SCHEMA) {
    throw new Error(`unsupported schema: ${String(msg.schema)}`);
  }
  if (!isFiniteNumber(msg.t_step) || !isFiniteNumber(msg.elbow_angle_deg)) {
    throw new Error('telemetry missing t_step/elbow_angle_deg');
  }
  if (
    msg.direction !== 'flex' &&
    msg.direction !== 'extend' &&
    msg.direction !== 'rest'
  ) {
    throw new Error(`bad direction: ${String(msg.direction)}`);
  }
  if (!isFiniteNumber(msg.magnitude) || msg.magnitude < 0 || msg.magnitude > 1) {
    throw new Error('magnitude outside [0, 1]');
  }
  if (!isNumberArray(msg.pred_envelope)) {
    throw new Error('pred_envelope must be a number array');
  }
  if (!Array.isArray(msg.eeg_preview) || !msg.eeg_preview.every(isNumberArray)) {
    throw new Error('eeg_preview must be an array of number arrays');
  }
  if (!isFiniteNumber(msg.processing_latency_ms)) {
    throw new Error('bad processing_latency_ms');
  }
  return {
    kind: 'telemetry',
    frame: {
      t_step: msg.t_step,
      elbow_angle_deg: msg.elbow_angle_deg,
      direction: msg.direction,
      magnitude: msg.magnitude,
      pred_envelope: msg.pred_envelope,
      eeg_preview: msg.eeg_preview as number[][],
      processing_latency_ms: msg.processing_latency_ms,
    },
  };
}
