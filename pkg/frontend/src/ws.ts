// Thin socket wrapper: parses incoming messages and fans them out.

import { ControlMessage, ServerMessage, parseMessage } from './protocol.js';

export type MessageListener = (msg: ServerMessage) => void;
export type StatusListener = (open: boolean) => void;

export class PipelineSocket {
  private ws: WebSocket | null = null;
  private messageListeners: MessageListener[] = [];
  private statusListeners: StatusListener[] = [];

  connect(url?: string): void {
    if (this.ws) return;
    const target = url ?? `${location.origin.replace(/^http/, 'ws')}/ws`;
    this.ws = new WebSocket(target);
    this.ws.onopen = () => this.statusListeners.forEach((l) => l(true));
    this.ws.onclose = () => {
      this.ws = null;
      this.statusListeners.forEach((l) => l(false));
    };
    this.ws.onmessage = (ev) => {
      let msg: ServerMessage;
      try {
        msg = parseMessage(String(ev.data));
      } catch (e) {
        console.warn('dropping malformed message:', e);
        return;
      }
      this.messageListeners.forEach((l) => l(msg));
    };
  }

  send(msg: ControlMessage): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(JSON.stringify(msg));
    return true;
  }

  onMessage(listener: MessageListener): void {
    this.messageListeners.push(listener);
  }

  onStatus(listener: StatusListener): void {
    this.statusListeners.push(listener);
  }
}
