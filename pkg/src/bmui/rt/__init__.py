"""Online pipeline: chunked causal processing, telemetry, WebSocket service."""
