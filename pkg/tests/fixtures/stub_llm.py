"""Deterministic chat-completion stub for classifier tests.

Answers every POST with a canned two-line verdict chosen by marker tokens in
the prompt text, so outcomes depend only on request content:

  ZZGROOM   -> Absolutely UNSAFE (grooming + off-platform reason)
  ZZPII     -> Absolutely UNSAFE (asks for personal information)
  ZZBAD     -> Possibly UNSAFE
  ZZMEH     -> Possibly SAFE
  ZZGARBAGE -> prose without a Decision line, every time
  ZZFLAKY   -> garbled first, valid after the format-retry instruction
  (none)    -> Absolutely SAFE

Usable in-process via ``start_stub_llm`` or standalone via ``--port``.
"""
from __future__ import annotations

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

RETRY_MARKER = "did not follow the required format"


def reply_for(messages: list[dict]) -> str:
    text = "\n".join(m.get("content", "") for m in messages)
    if "ZZGARBAGE" in text:
        return "I think this conversation is probably fine, nothing to see."
    if "ZZFLAKY" in text and RETRY_MARKER not in text:
        return "Sure! Let me think about whether this is safe..."
    if "ZZGROOM" in text:
        return "Decision: Absolutely UNSAFE\nReason: grooming behavior, asks to move to discord"
    if "ZZPII" in text:
        return "Decision: Absolutely UNSAFE\nReason: grooming with asks for age and personal information"
    if "ZZBAD" in text:
        return "Decision: Possibly UNSAFE\nReason: ambiguous but concerning signals"
    if "ZZMEH" in text:
        return "Decision: Possibly SAFE\nReason: short unclear phrases"
    return "Decision: Absolutely SAFE\nReason: friendly game talk"


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 (http.server API)
        length = int(self.headers.get("Content-Length", 0))
        try:
            payload = json.loads(self.rfile.read(length))
            content = reply_for(payload["messages"])
        except (ValueError, KeyError):
            self.send_response(400)
            self.end_headers()
            return
        body = json.dumps(
            {"choices": [{"message": {"role": "assistant", "content": content}}]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):
        pass


def start_stub_llm(port: int = 0) -> tuple[ThreadingHTTPServer, str]:
    server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, default=8811)
    args = parser.parse_args()
    server, url = start_stub_llm(args.port)
    print(url, flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
