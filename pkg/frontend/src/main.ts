import { drawArm } from './arm.js';
import { bindControls, Toast } from './controls.js';
import { HistoryPoint, UiState, initialState, onFrame, onStatus } from './state.js';
import { TARGET_ANGLE, TaskTarget, TaskTimer } from './timer.js';
import { PipelineSocket } from './ws.js';

const socket = new PipelineSocket();
const timer = new TaskTimer();
let state: UiState = initialState();

const canvas = document.getElementById('arm') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const historyCanvas = document.getElementById('history') as HTMLCanvasElement;
const historyCtx = historyCanvas.getContext('2d')!;

const statusEl = document.getElementById('status')!;
const directionEl = document.getElementById('direction')!;
const magnitudeEl = document.getElementById('magnitude')!;
const latencyEl = document.getElementById('latency')!;
const timerEl = document.getElementById('timer')!;
const toastEl = document.getElementById('toast')!;

const toast: Toast = {
  show(text, isError) {
    toastEl.textContent = text;
    toastEl.className = isError ? 'toast error' : 'toast';
    toastEl.classList.add('visible');
    setTimeout(() => toastEl.classList.remove('visible'), 2500);
  },
};

socket.onStatus((open) => {
  state = onStatus(state, open ? 'open' : 'closed');
  statusEl.textContent = open ? 'connected' : 'disconnected';
  statusEl.className = open ? 'status ok' : 'status bad';
  if (!open) {
    timer.onDisconnect();
    if (timer.state.phase === 'aborted') {
      toast.show(`task aborted: ${timer.state.reason}`, true);
    }
  }
});

socket.onMessage((msg) => {
  if (msg.kind === 'reply') {
    if (msg.reply.type === 'err') toast.show(msg.reply.detail, true);
    return;
  }
  state = onFrame(state, msg.frame);
  timer.onFrame(msg.frame);
});

function bindTaskButton(id: string, target: TaskTarget) {
  document.getElementById(id)?.addEventListener('click', () => {
    if (state.latest) timer.start(target, state.latest);
  });
}
bindTaskButton('task-flex', 'flex-to-120');
bindTaskButton('task-extend', 'extend-to-10');

bindControls(document, (m) => {
  if (!socket.send(m)) toast.show('not connected', true);
}, toast);

function renderTimer(): string {
  const t = timer.state;
  switch (t.phase) {
    case 'idle':
      return '–';
    case 'running':
      return `${t.target} … (target ${TARGET_ANGLE[t.target]}°)`;
    case 'done':
      return `${t.target}: ${t.elapsedS.toFixed(1)} s`;
    case 'aborted':
      return `${t.target}: aborted`;
  }
}

function renderHistory(points: HistoryPoint[]) {
  const { width, height } = historyCanvas;
  historyCtx.clearRect(0, 0, width, height);
  if (points.length < 2) return;
  const maxEnv = Math.max(...points.map((p) => p.envelope), 1e-6);
  const t1 = points[points.length - 1].t_step;
  const t0 = t1 - 200; // 10 s of 50 ms steps
  historyCtx.strokeStyle = '#7e9cc4';
  historyCtx.lineWidth = 2;
  historyCtx.beginPath();
  points.forEach((p, i) => {
    const x = ((p.t_step - t0) / (t1 - t0)) * width;
    const y = height - (p.envelope / maxEnv) * (height - 8) - 4;
    if (i === 0) historyCtx.moveTo(x, y);
    else historyCtx.lineTo(x, y);
  });
  historyCtx.stroke();
}

function render() {
  const frame = state.latest;
  if (frame) {
    drawArm(ctx, canvas.width, canvas.height, frame.elbow_angle_deg);
    directionEl.textContent = frame.direction;
    magnitudeEl.textContent = frame.magnitude.toFixed(2);
    latencyEl.textContent = `${frame.processing_latency_ms.toFixed(1)} ms`;
    renderHistory(state.history);
  }
  timerEl.textContent = renderTimer();
  requestAnimationFrame(render);
}

socket.connect();
requestAnimationFrame(render);
