"""Local chat-completion server that answers from fixtures instead of a model."""

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


def heuristic_reply(prompt: str, count: int) -> str:
    """A rule-based stand-in for a model.

    Selections take the first listed candidate. Completions copy a value from
    a "The <description> is <value>." sentence in the query when there is one,
    otherwise use the first candidate API, otherwise answer none. Every fifth
    reply is prose with no JSON to exercise the re-ask path, and every seventh
    is wrapped in chatter and a code fence.
    """
    if count % 5 == 4:
        return "I think the answer is the first API, but let me consider."
    if "Candidate APIs:" in prompt:
        match = re.search(r"Candidate APIs:\n- (\w+):", prompt)
        body = {"api": match.group(1) if match else None}
    else:
        query = prompt.split("User query:\n", 1)[1].split("\nArguments to fill:", 1)[0]
        block = prompt.split("Arguments to fill:\n", 1)[1].split("\n\n", 1)[0]
        body = {}
        current = None
        for line in block.splitlines():
            arg = re.match(r"- (\w+) \(\w+\): (.*)$", line)
            api = re.match(r"    - (\w+):", line)
            if arg:
                current = arg.group(1)
                found = re.search(rf"The {re.escape(arg.group(2))} is (.+?)\.(?: |$|\n)", query)
                body[current] = (
                    {"kind": "value", "value": found.group(1)} if found else {"kind": "none"}
                )
            elif api and current and body[current] == {"kind": "none"}:
                body[current] = {"kind": "api", "api": api.group(1)}
    text = json.dumps(body)
    if count % 7 == 6:
        return f"Sure! Here you go:\n```json\n{text}\n```"
    return text


class FakeChatServer:
    """Serve ``reply(prompt, count)`` or a fixed list of replies over HTTP."""

    def __init__(self, reply=heuristic_reply, replies=None, status=200):
        self.reply = reply
        self.replies = list(replies) if replies is not None else None
        self.status = status
        self.requests: list[dict] = []
        self.lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                with server.lock:
                    count = len(server.requests)
                    server.requests.append(
                        {"payload": payload, "auth": self.headers.get("Authorization")}
                    )
                    if server.replies is not None:
                        text = server.replies[count % len(server.replies)]
                    else:
                        text = server.reply(payload["messages"][-1]["content"], count)
                body = json.dumps({"choices": [{"message": {"content": text}}]}).encode()
                self.send_response(server.status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()
