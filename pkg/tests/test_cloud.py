import inspect
import random
import threading

import pytest

import privshare.cloud as cloud_module
from privshare import client, search_real, wire
from privshare.access import new_authority, parse_policy, wrap
from privshare.cloud import (
    CloudServer,
    CloudStore,
    ImageRecord,
    QueryJob,
    SearchCloud,
    SharingCloud,
    execute_query,
    retrieve,
    split_item,
)
from privshare.descriptor import Descriptor, FeatureVector, REAL, similarity
from privshare.errors import (
    Conflict,
    MalformedRecord,
    NotFound,
    RemoteError,
    VariantMismatch,
)
from privshare.fixedpoint import FixedPointParams
from privshare.ot import OtChoice, ot_choose, ot_finalize
from privshare.wire import b64e, int_to_b64

PRIME_BITS = 256


def make_record(image_id="img0", variant="real", seed=0):
    rng = random.Random(seed)
    return ImageRecord(
        image_id=image_id,
        variant=variant,
        public_bag=bytes(rng.randrange(256) for _ in range(50)),
        private_bag=bytes(rng.randrange(256) for _ in range(30)),
        search_bag=bytes(rng.randrange(256) for _ in range(70)),
    )


def seeded_owner(store, tmp_path, rng, n_images=3, dim=8, vectors=2):
    """Upload a small real-variant corpus; returns (keys, descriptors)."""
    keys = search_real.gen_search_keys(dim, PRIME_BITS, FixedPointParams(), rng)
    authority = new_authority(rng)
    env = wrap(parse_policy("friend"), b"keys", authority, rng)
    from privshare.access import envelope_to_bytes

    store.put_envelope("owner", envelope_to_bytes(env),
                       int_to_b64(int(keys.public_key.n)), "real")
    descs = {}
    for i in range(n_images):
        desc = Descriptor(tuple(
            FeatureVector(tuple(rng.uniform(-1, 1) for _ in range(dim)))
            for _ in range(vectors)), REAL)
        bag = search_real.owner_encrypt_descriptor(desc, keys, rng)
        store.upload("owner", ImageRecord(
            image_id=f"img{i}", variant="real",
            public_bag=b"public-%d" % i,
            private_bag=b"private-%d" % i,
            search_bag=search_real.search_bag_to_bytes(bag, keys.public_key)))
        descs[f"img{i}"] = desc
    return keys, descs


# ---- storage ----

def test_upload_fetch_byte_equality(tmp_path):
    store = CloudStore(tmp_path)
    rec = make_record()
    store.upload("alice", rec)
    got = store.get_image("alice", "img0")
    assert got == rec


def test_upload_idempotent_on_identical(tmp_path):
    store = CloudStore(tmp_path)
    store.upload("alice", make_record(seed=3))
    store.upload("alice", make_record(seed=3))
    assert len(store.list_images("alice")) == 1


def test_upload_conflict_on_different_bytes(tmp_path):
    store = CloudStore(tmp_path)
    store.upload("alice", make_record(seed=3))
    with pytest.raises(Conflict):
        store.upload("alice", make_record(seed=4))


def test_upload_missing_search_bag(tmp_path):
    store = CloudStore(tmp_path)
    rec = make_record()
    bad = ImageRecord(rec.image_id, rec.variant, rec.public_bag,
                      rec.private_bag, b"")
    with pytest.raises(MalformedRecord):
        store.upload("alice", bad)


def test_bad_ids_rejected(tmp_path):
    store = CloudStore(tmp_path)
    with pytest.raises(MalformedRecord):
        store.upload("../evil", make_record())
    rec = make_record(image_id="a/b")
    with pytest.raises(MalformedRecord):
        store.upload("alice", rec)


def test_unknown_owner_not_found(tmp_path):
    store = CloudStore(tmp_path)
    with pytest.raises(NotFound):
        store.list_images("ghost")
    with pytest.raises(NotFound):
        store.get_envelope("ghost")


def test_envelope_round_trip_and_stability(tmp_path):
    store = CloudStore(tmp_path)
    store.put_envelope("alice", b"envelope-bytes", int_to_b64(99), "real")
    for _ in range(100):
        env, meta = store.get_envelope("alice")
        assert env == b"envelope-bytes"
        assert meta["variant"] == "real"


def test_envelope_conflict_without_force(tmp_path):
    store = CloudStore(tmp_path)
    store.put_envelope("alice", b"one", int_to_b64(99), "real")
    store.put_envelope("alice", b"one", int_to_b64(99), "real")  # idempotent
    with pytest.raises(Conflict):
        store.put_envelope("alice", b"two", int_to_b64(99), "real")
    store.put_envelope("alice", b"two", int_to_b64(99), "real", force=True)
    assert store.get_envelope("alice")[0] == b"two"


# ---- query execution ----

def test_query_empty_owner(tmp_path, rng):
    store = CloudStore(tmp_path)
    store.put_envelope("owner", b"e", int_to_b64(7), "real")
    job = QueryJob("s", "owner", "real", b"")
    assert execute_query(store, job) == []


def test_query_matches_plaintext_oracle(tmp_path, rng):
    store = CloudStore(tmp_path)
    keys, descs = seeded_owner(store, tmp_path, rng)
    query = Descriptor(tuple(
        FeatureVector(tuple(rng.uniform(-1, 1) for _ in range(8)))
        for _ in range(2)), REAL)
    enc = search_real.querier_encode(query, keys, rng)
    job = QueryJob("s", "owner", "real",
                   search_real.query_to_bytes(enc, keys.public_key))
    results = execute_query(store, job)
    assert [idx for idx, _ in results] == [0, 1, 2]
    for idx, blob in results:
        matrix = search_real.matrix_from_bytes(blob, idx)
        score = search_real.querier_finalize(matrix, keys)
        assert score == similarity(descs[f"img{idx}"], query)


def test_query_parallel_equals_serial(tmp_path, rng):
    store = CloudStore(tmp_path)
    keys, _ = seeded_owner(store, tmp_path, rng)
    query = Descriptor((FeatureVector(tuple(rng.uniform(-1, 1) for _ in range(8))),), REAL)
    enc = search_real.querier_encode(query, keys, rng)
    job = QueryJob("s", "owner", "real",
                   search_real.query_to_bytes(enc, keys.public_key))
    assert execute_query(store, job, workers=1) == execute_query(store, job, workers=2)


def test_query_variant_mismatch(tmp_path, rng):
    store = CloudStore(tmp_path)
    seeded_owner(store, tmp_path, rng)
    job = QueryJob("s", "owner", "binary", b"")
    with pytest.raises(VariantMismatch):
        execute_query(store, job)


# ---- retrieval ----

def test_retrieve_round_trip(tmp_path, rng):
    store = CloudStore(tmp_path)
    seeded_owner(store, tmp_path, rng)
    choice = OtChoice(frozenset({1}), frozenset({0, 1, 2}))
    requests, secrets = ot_choose(choice, rng=rng)
    response = retrieve(store, "owner", sorted(choice.sigma_prime), requests, rng)
    items = ot_finalize(secrets, response)
    pub, priv = split_item(items[1])
    assert pub == b"public-1" and priv == b"private-1"


def test_retrieve_unknown_index(tmp_path, rng):
    store = CloudStore(tmp_path)
    seeded_owner(store, tmp_path, rng)
    with pytest.raises(NotFound):
        retrieve(store, "owner", [0, 9], [], rng)


# ---- static privacy assertion ----

def test_search_cloud_module_has_no_secret_key_dependency():
    source = inspect.getsource(cloud_module)
    for forbidden in ("decrypt", "PaillierSecretKey", "secret_key", "SecretKey"):
        assert forbidden not in source, forbidden


# ---- wire protocol ----

def test_wire_canonical_encoding():
    raw = wire.encode_message("QUERY", {"b": 1, "a": 2})
    assert raw[4:] == b'{"body":{"a":2,"b":1},"type":"QUERY"}'


def test_wire_big_int_round_trip():
    v = 2**521 - 1
    assert wire.int_from_b64(wire.int_to_b64(v)) == v


@pytest.fixture()
def server(tmp_path):
    store = CloudStore(tmp_path / "data")
    srv = CloudServer(("127.0.0.1", 0), store, "both", rng=random.Random(12))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv, store
    srv.shutdown()


def test_server_error_relayed_as_remote_error(server):
    srv, _ = server
    host, port = srv.server_address
    with pytest.raises(RemoteError) as exc:
        wire.request(host, port, wire.MSG_FETCH_ENVELOPE, {"owner_id": "ghost"})
    assert exc.value.code == "NOT_FOUND"


def test_server_upload_and_fetch_envelope(server):
    srv, _ = server
    host, port = srv.server_address
    cc = client.CloudClient(host, port)
    authority = new_authority(random.Random(1))
    env = wrap(parse_policy("friend"), b"material", authority, random.Random(2))
    cc.upload_envelope("alice", env, 12345, "real")
    got, modulus, variant = cc.fetch_envelope("alice")
    assert got == env and modulus == 12345 and variant == "real"


def test_server_rejects_unknown_type(server):
    srv, _ = server
    host, port = srv.server_address
    with pytest.raises(RemoteError):
        wire.request(host, port, "BOGUS", {})


def test_search_role_refuses_upload(tmp_path):
    store = CloudStore(tmp_path / "d")
    srv = CloudServer(("127.0.0.1", 0), store, "search")
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    host, port = srv.server_address
    try:
        with pytest.raises(RemoteError):
            wire.request(host, port, wire.MSG_UPLOAD,
                         {"kind": "envelope", "owner_id": "a",
                          "envelope_b64": b64e(b"x"), "modulus_b64": int_to_b64(5),
                          "variant": "real"})
    finally:
        srv.shutdown()


def test_in_process_services_share_store(tmp_path, rng):
    store = CloudStore(tmp_path)
    sharing = SharingCloud(store, rng=rng)
    search = SearchCloud(store)
    keys, descs = seeded_owner(store, tmp_path, rng)
    query = Descriptor((FeatureVector(tuple(rng.uniform(-1, 1) for _ in range(8))),), REAL)
    enc = search_real.querier_encode(query, keys, rng)
    msg_type, body = search.handle(wire.MSG_QUERY, {
        "owner_id": "owner", "variant": "real",
        "query_b64": b64e(search_real.query_to_bytes(enc, keys.public_key)),
    })
    assert msg_type == wire.MSG_QUERY_RESULT
    assert body["manifest"] == ["img0", "img1", "img2"]
    assert [e["index"] for e in body["images"]] == [0, 1, 2]
    env_type, env_body = sharing.handle(wire.MSG_FETCH_ENVELOPE, {"owner_id": "owner"})
    assert env_type == wire.MSG_FETCH_ENVELOPE and env_body["envelope_b64"]
