"""Length-prefixed JSON wire protocol shared by both cloud endpoints.

Every message is a 4-byte big-endian length followed by UTF-8 JSON of the
form {"body": {...}, "type": "..."} with alphabetical key order, so
transcripts are byte-reproducible under fixed randomness.  Binary fields
travel base64; big integers as base64 big-endian byte strings.
"""

from __future__ import annotations

import base64
import json
import socket
import struct

from .errors import RemoteError

MSG_UPLOAD = "UPLOAD"
MSG_FETCH_ENVELOPE = "FETCH_ENVELOPE"
MSG_QUERY = "QUERY"
MSG_QUERY_RESULT = "QUERY_RESULT"
MSG_OT_REQUEST = "OT_REQUEST"
MSG_OT_RESPONSE = "OT_RESPONSE"
MSG_ERROR = "ERROR"

DEFAULT_SHARING_PORT = 7701
DEFAULT_SEARCH_PORT = 7702

MAX_MESSAGE_BYTES = 512 * 1024 * 1024


def b64e(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def b64d(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def int_to_b64(value: int) -> str:
    v = int(value)
    length = max(1, (v.bit_length() + 7) // 8)
    return b64e(v.to_bytes(length, "big"))


def int_from_b64(text: str) -> int:
    return int.from_bytes(b64d(text), "big")


def encode_message(msg_type: str, body: dict) -> bytes:
    payload = json.dumps({"body": body, "type": msg_type},
                         sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


def _read_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("peer closed mid-message")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_message(sock: socket.socket) -> tuple[str, dict]:
    (length,) = struct.unpack(">I", _read_exact(sock, 4))
    if length > MAX_MESSAGE_BYTES:
        raise RemoteError("PROTOCOL", f"message of {length} bytes exceeds limit")
    obj = json.loads(_read_exact(sock, length).decode("utf-8"))
    return obj["type"], obj["body"]


def send_message(sock: socket.socket, msg_type: str, body: dict) -> None:
    sock.sendall(encode_message(msg_type, body))


def request(host: str, port: int, msg_type: str, body: dict) -> tuple[str, dict]:
    """One request/response round trip; raises RemoteError on ERROR replies."""
    with socket.create_connection((host, port)) as sock:
        send_message(sock, msg_type, body)
        reply_type, reply_body = recv_message(sock)
    if reply_type == MSG_ERROR:
        raise RemoteError(reply_body.get("code", "UNKNOWN"),
                          reply_body.get("message", ""))
    return reply_type, reply_body
