// Operator input: hold-to-flex/extend keys, gain/threshold sliders, source
// selection. The key repeater is its own class so the 10 Hz emit/release
// contract can be tested without key events.

import { ControlMessage } from './protocol.js';

export const INTENT_PERIOD_MS = 100; // 10 Hz while a key is held

type Send = (msg: ControlMessage) => void;

export class IntentRepeater {
  private held: 'flex' | 'extend' | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private send: Send,
    private level: () => number = () => 1.0
  ) {}

  press(direction: 'flex' | 'extend'): void {
    if (this.held === direction) return;
    this.held = direction;
    this.emit();
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = setInterval(() => this.emit(), INTENT_PERIOD_MS);
  }

  release(): void {
    if (this.held === null) return;
    this.held = null;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    // Contract: level must drop to 0 within 100 ms of release; emitting
    // synchronously satisfies that with margin.
    this.send({ type: 'intent', direction: 'rest', level: 0 });
  }

  private emit(): void {
    if (this.held === null) return;
    this.send({ type: 'intent', direction: this.held, level: this.level() });
  }
}

export interface Toast {
  show(text: string, isError: boolean): void;
}

export function bindControls(
  doc: Document,
  send: Send,
  toast: Toast
): IntentRepeater {
  const levelInput = doc.getElementById('intent-level') as HTMLInputElement;
  const repeater = new IntentRepeater(send, () =>
    levelInput ? Number(levelInput.value) : 1.0
  );

  doc.addEventListener('keydown', (ev) => {
    if (ev.repeat) return;
    if (ev.key === 'f') repeater.press('flex');
    if (ev.key === 'e') repeater.press('extend');
  });
  doc.addEventListener('keyup', (ev) => {
    if (ev.key === 'f' || ev.key === 'e') repeater.release();
  });

  bindSlider(doc, 'gain', (v) => send({ type: 'set_gain', value: v }));
  bindSlider(doc, 'threshold', (v) =>
    send({ type: 'set_threshold_fraction', value: v })
  );

  const sourceInput = doc.getElementById('source') as HTMLInputElement;
  doc.getElementById('apply-source')?.addEventListener('click', () => {
    if (sourceInput.value) send({ type: 'set_source', value: sourceInput.value });
  });
  doc.getElementById('reset-arm')?.addEventListener('click', () => {
    send({ type: 'reset_arm' });
  });

  return repeater;
}

function bindSlider(doc: Document, id: string, apply: (v: number) => void) {
  const input = doc.getElementById(id) as HTMLInputElement | null;
  const label = doc.getElementById(`${id}-value`);
  input?.addEventListener('input', () => {
    const v = Number(input.value);
    if (label) label.textContent = v.toFixed(2);
    apply(v);
  });
}
