"""Sharing-cloud and search-cloud services over a shared desk-scale store.

The two clouds are logical endpoints: they can run inside one process for
tests or as two processes bound to different ports.  Neither endpoint ever
holds private key material; the search side evaluates homomorphic distance
protocols on ciphertexts only, and this module deliberately imports only
ciphertext-domain operations.
"""

from __future__ import annotations

import atexit
import json
import multiprocessing
import re
import socketserver
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    Conflict,
    InvalidChoice,
    MalformedRecord,
    MalformedRequest,
    NotFound,
    PrivShareError,
    VariantMismatch,
)
from .ot import OtResponse, ot_respond, ot_setup
from .paillier import PaillierPublicKey
from .search_bin import cloud_eval
from .search_bin import query_from_bytes as bin_query_from_bytes
from .search_bin import search_bag_from_bytes as bin_bag_from_bytes
from .search_real import EncryptedDistanceMatrix, cloud_distance_matrix, matrix_to_bytes
from .search_real import query_from_bytes as real_query_from_bytes
from .search_real import search_bag_from_bytes as real_bag_from_bytes
from . import wire
from .wire import (
    MSG_ERROR,
    MSG_FETCH_ENVELOPE,
    MSG_OT_REQUEST,
    MSG_OT_RESPONSE,
    MSG_QUERY,
    MSG_QUERY_RESULT,
    MSG_UPLOAD,
    b64d,
    b64e,
    int_from_b64,
)

_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")

VARIANTS = ("real", "binary")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    variant: str
    public_bag: bytes
    private_bag: bytes
    search_bag: bytes

    def validate(self) -> None:
        if not _ID_RE.match(self.image_id):
            raise MalformedRecord(f"bad image id {self.image_id!r}")
        if self.variant not in VARIANTS:
            raise MalformedRecord(f"bad variant {self.variant!r}")
        if not self.search_bag:
            raise MalformedRecord("missing search bag")
        if not self.public_bag:
            raise MalformedRecord("missing public bag")


@dataclass(frozen=True)
class QueryJob:
    session_id: str
    owner_id: str
    variant: str
    query_bytes: bytes


class CloudStore:
    """Directory-per-owner storage: one file per bag plus a manifest.
    Writes are serialized; reads over immutable bags run lock-free."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _owner_dir(self, owner_id: str, create: bool = False) -> Path:
        if not _ID_RE.match(owner_id):
            raise MalformedRecord(f"bad owner id {owner_id!r}")
        path = self.root / "owners" / owner_id
        if create:
            (path / "images").mkdir(parents=True, exist_ok=True)
        elif not path.exists():
            raise NotFound(f"unknown owner {owner_id!r}")
        return path

    def _manifest(self, owner_dir: Path) -> dict:
        path = owner_dir / "manifest.json"
        if path.exists():
            return json.loads(path.read_text())
        return {"images": []}

    def _write_manifest(self, owner_dir: Path, manifest: dict) -> None:
        (owner_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True))

    def put_envelope(self, owner_id: str, envelope: bytes, modulus_b64: str,
                     variant: str, force: bool = False) -> None:
        with self._write_lock:
            owner_dir = self._owner_dir(owner_id, create=True)
            env_path = owner_dir / "envelope.bin"
            meta_path = owner_dir / "meta.json"
            if env_path.exists() and not force:
                if env_path.read_bytes() == envelope:
                    return
                raise Conflict(f"owner {owner_id!r} already has different keys")
            env_path.write_bytes(envelope)
            meta_path.write_text(json.dumps(
                {"modulus_b64": modulus_b64, "owner_id": owner_id, "variant": variant},
                sort_keys=True))

    def get_envelope(self, owner_id: str) -> tuple[bytes, dict]:
        owner_dir = self._owner_dir(owner_id)
        env_path = owner_dir / "envelope.bin"
        if not env_path.exists():
            raise NotFound(f"owner {owner_id!r} has no key envelope")
        meta = json.loads((owner_dir / "meta.json").read_text())
        return env_path.read_bytes(), meta

    def upload(self, owner_id: str, record: ImageRecord) -> None:
        record.validate()
        with self._write_lock:
            owner_dir = self._owner_dir(owner_id, create=True)
            manifest = self._manifest(owner_dir)
            images_dir = owner_dir / "images"
            paths = {
                "public": images_dir / f"{record.image_id}.public",
                "private": images_dir / f"{record.image_id}.private",
                "search": images_dir / f"{record.image_id}.search",
            }
            new_bytes = {
                "public": record.public_bag,
                "private": record.private_bag,
                "search": record.search_bag,
            }
            existing = [e for e in manifest["images"]
                        if e["image_id"] == record.image_id]
            if existing:
                same = (existing[0]["variant"] == record.variant and
                        all(paths[k].read_bytes() == new_bytes[k] for k in paths))
                if same:
                    return
                raise Conflict(
                    f"image {record.image_id!r} exists with different content")
            for key, path in paths.items():
                path.write_bytes(new_bytes[key])
            manifest["images"].append(
                {"image_id": record.image_id, "variant": record.variant})
            self._write_manifest(owner_dir, manifest)

    def list_images(self, owner_id: str) -> list[dict]:
        return self._manifest(self._owner_dir(owner_id))["images"]

    def get_image(self, owner_id: str, image_id: str) -> ImageRecord:
        owner_dir = self._owner_dir(owner_id)
        entries = [e for e in self._manifest(owner_dir)["images"]
                   if e["image_id"] == image_id]
        if not entries:
            raise NotFound(f"unknown image {image_id!r}")
        images_dir = owner_dir / "images"
        return ImageRecord(
            image_id=image_id,
            variant=entries[0]["variant"],
            public_bag=(images_dir / f"{image_id}.public").read_bytes(),
            private_bag=(images_dir / f"{image_id}.private").read_bytes(),
            search_bag=(images_dir / f"{image_id}.search").read_bytes(),
        )

    def owner_modulus(self, owner_id: str) -> int:
        _, meta = self.get_envelope(owner_id)
        return int_from_b64(meta["modulus_b64"])


# ---- query evaluation ----

def _eval_one_image(args: tuple[str, bytes, bytes, int]) -> bytes:
    """Worker-safe: parse the stored bag and the query, fold distances."""
    variant, bag_bytes, query_bytes, n = args
    pk = PaillierPublicKey.from_modulus(n)
    if variant == "real":
        bag = real_bag_from_bytes(bag_bytes)
        query = real_query_from_bytes(query_bytes)
        matrix = cloud_distance_matrix(bag, query, pk)
    else:
        bag = bin_bag_from_bytes(bag_bytes)
        inputs = bin_query_from_bytes(query_bytes)
        rows = tuple(
            tuple(int(cloud_eval(gates, gi, pk).value) for gi in inputs)
            for gates in bag.vectors
        )
        matrix = EncryptedDistanceMatrix(0, rows)
    return matrix_to_bytes(matrix, pk)


_pool = None
_pool_size = 0


def _shutdown_pool():
    global _pool, _pool_size
    if _pool is not None:
        _pool.terminate()
        _pool.join()
        _pool = None
        _pool_size = 0


def _get_pool(workers: int):
    # spawn context so pool creation stays safe inside server threads
    global _pool, _pool_size
    if _pool is None or _pool_size != workers:
        _shutdown_pool()
        _pool = multiprocessing.get_context("spawn").Pool(workers)
        _pool_size = workers
        atexit.register(_shutdown_pool)
    return _pool


def execute_query(store: CloudStore, job: QueryJob,
                  workers: int = 1) -> list[tuple[int, bytes]]:
    """Encrypted distance matrices for every image of the owner, in
    ascending image-index order regardless of content."""
    entries = store.list_images(job.owner_id)
    n = store.owner_modulus(job.owner_id)
    tasks = []
    for entry in entries:
        if entry["variant"] != job.variant:
            raise VariantMismatch(
                f"stored variant {entry['variant']} vs query {job.variant}")
        record = store.get_image(job.owner_id, entry["image_id"])
        tasks.append((job.variant, record.search_bag, job.query_bytes, n))
    if workers > 1 and len(tasks) > 1:
        results = _get_pool(workers).map(_eval_one_image, tasks)
    else:
        results = [_eval_one_image(t) for t in tasks]
    return list(enumerate(results))


# ---- oblivious retrieval ----

def _frame_item(record: ImageRecord) -> bytes:
    pub, priv = record.public_bag, record.private_bag
    return (len(pub).to_bytes(4, "big") + pub +
            len(priv).to_bytes(4, "big") + priv)


def split_item(raw: bytes) -> tuple[bytes, bytes]:
    pub_len = int.from_bytes(raw[:4], "big")
    pub = raw[4:4 + pub_len]
    pos = 4 + pub_len
    priv_len = int.from_bytes(raw[pos:pos + 4], "big")
    return pub, raw[pos + 4:pos + 4 + priv_len]


def retrieve(store: CloudStore, owner_id: str, sigma_prime: list[int],
             requests: list[int], rng=None) -> OtResponse:
    """Run the transfer over the owner's full store; unknown indices in
    the padded set are a NotFound."""
    entries = store.list_images(owner_id)
    for idx in sigma_prime:
        if not 0 <= idx < len(entries):
            raise NotFound(f"image index {idx} out of range")
    items = [_frame_item(store.get_image(owner_id, e["image_id"]))
             for e in entries]
    state, _ = ot_setup(items, rng=rng)
    return ot_respond(state, requests, sigma_prime, rng=rng)


# ---- wire services ----

_ERROR_CODES = {
    NotFound: "NOT_FOUND",
    Conflict: "CONFLICT",
    MalformedRecord: "MALFORMED_RECORD",
    VariantMismatch: "VARIANT_MISMATCH",
    MalformedRequest: "MALFORMED_REQUEST",
    InvalidChoice: "INVALID_CHOICE",
}


def _error_body(exc: Exception) -> dict:
    code = _ERROR_CODES.get(type(exc), "PROTOCOL")
    return {"code": code, "message": str(exc)}


class SharingCloud:
    """Stores bags and envelopes; answers retrieval requests obliviously."""

    def __init__(self, store: CloudStore, rng=None):
        self.store = store
        self.rng = rng

    def handle(self, msg_type: str, body: dict) -> tuple[str, dict]:
        if msg_type == MSG_UPLOAD:
            return self._handle_upload(body)
        if msg_type == MSG_FETCH_ENVELOPE:
            env, meta = self.store.get_envelope(body["owner_id"])
            return MSG_FETCH_ENVELOPE, {
                "envelope_b64": b64e(env),
                "modulus_b64": meta["modulus_b64"],
                "owner_id": meta["owner_id"],
                "variant": meta["variant"],
            }
        if msg_type == MSG_OT_REQUEST:
            response = retrieve(
                self.store, body["owner_id"],
                [int(i) for i in body["sigma_prime"]],
                [int_from_b64(r) for r in body["requests"]],
                rng=self.rng,
            )
            return MSG_OT_RESPONSE, {
                "big_y_b64": wire.int_to_b64(response.big_y),
                "indices": list(response.indices),
                "items_b64": [b64e(c) for c in response.items],
                "tables_b64": [[b64e(w) for w in row] for row in response.key_tables],
            }
        raise MalformedRequest(f"sharing cloud cannot handle {msg_type!r}")

    def _handle_upload(self, body: dict) -> tuple[str, dict]:
        kind = body.get("kind")
        if kind == "envelope":
            self.store.put_envelope(
                body["owner_id"], b64d(body["envelope_b64"]),
                body["modulus_b64"], body["variant"],
                force=bool(body.get("force", False)))
            return MSG_UPLOAD, {"ok": True, "owner_id": body["owner_id"]}
        if kind == "image":
            record = ImageRecord(
                image_id=body["image_id"],
                variant=body["variant"],
                public_bag=b64d(body["public_b64"]),
                private_bag=b64d(body["private_b64"]),
                search_bag=b64d(body["search_b64"]),
            )
            self.store.upload(body["owner_id"], record)
            return MSG_UPLOAD, {
                "image_id": record.image_id, "ok": True, "owner_id": body["owner_id"]}
        raise MalformedRecord(f"unknown upload kind {kind!r}")


class SearchCloud:
    """Evaluates encrypted distance queries; never sees plaintexts."""

    def __init__(self, store: CloudStore, workers: int = 1):
        self.store = store
        self.workers = workers

    def handle(self, msg_type: str, body: dict) -> tuple[str, dict]:
        if msg_type != MSG_QUERY:
            raise MalformedRequest(f"search cloud cannot handle {msg_type!r}")
        job = QueryJob(
            session_id=body.get("session_id", ""),
            owner_id=body["owner_id"],
            variant=body["variant"],
            query_bytes=b64d(body["query_b64"]),
        )
        results = execute_query(self.store, job, workers=self.workers)
        manifest = [e["image_id"] for e in self.store.list_images(job.owner_id)]
        return MSG_QUERY_RESULT, {
            "images": [{"index": idx, "matrix_b64": b64e(blob)}
                       for idx, blob in results],
            "manifest": manifest,
            "owner_id": job.owner_id,
            "variant": job.variant,
        }


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            msg_type, body = wire.recv_message(self.request)
        except (ConnectionError, ValueError, KeyError):
            return
        service = self.server.dispatch.get(msg_type)
        try:
            if service is None:
                raise MalformedRequest(f"no endpoint for {msg_type!r}")
            reply_type, reply_body = service.handle(msg_type, body)
        except PrivShareError as exc:
            reply_type, reply_body = MSG_ERROR, _error_body(exc)
        except Exception as exc:  # keep the server alive on handler bugs
            reply_type, reply_body = MSG_ERROR, {"code": "INTERNAL", "message": str(exc)}
        wire.send_message(self.request, reply_type, reply_body)


class CloudServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, store: CloudStore, role: str,
                 workers: int = 1, rng=None):
        super().__init__(address, _Handler)
        sharing = SharingCloud(store, rng=rng)
        search = SearchCloud(store, workers=workers)
        self.dispatch = {}
        if role in ("sharing", "both"):
            self.dispatch.update({
                MSG_UPLOAD: sharing,
                MSG_FETCH_ENVELOPE: sharing,
                MSG_OT_REQUEST: sharing,
            })
        if role in ("search", "both"):
            self.dispatch[MSG_QUERY] = search
        if not self.dispatch:
            raise ValueError(f"unknown role {role!r}")
