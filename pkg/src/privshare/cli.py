"""Operator commands covering the full lifecycle: key generation and
publication, credential grants, image upload, end-to-end query with
oblivious retrieval, and the microbenchmark harness.

Exit codes: 0 ok, 2 access denied, 3 protocol error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import threading
from pathlib import Path

from . import access, bench, client, search_bin, search_real
from .access import AttributeCredential
from .cloud import CloudServer, CloudStore
from .config import Config, load_config
from .descriptor import BINARY, REAL, load_descriptor, toy_extract
from .errors import (
    AccessDenied,
    ExistingKeys,
    ParseError,
    PrivShareError,
    UnsupportedFormat,
    VariantMismatch,
)
from .fixedpoint import FixedPointParams
from .ot import pad_choice
from .rop import crop, load_pgm, load_rop_fixture, pgm_from_bytes, recover, save_pgm
from .wire import b64d, b64e

EXIT_OK = 0
EXIT_ACCESS = 2
EXIT_PROTOCOL = 3
EXIT_IO = 4


# ---- local client-side state ----

def _authority(cfg: Config, rng) -> access.AuthorityState:
    path = Path(cfg.client_dir) / "authority.json"
    if path.exists():
        obj = json.loads(path.read_text())
        return access.AuthorityState(b64d(obj["master_secret"]))
    auth = access.new_authority(rng)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"master_secret": b64e(auth.master_secret)}))
    return auth


def _keys_path(cfg: Config, owner_id: str) -> Path:
    return Path(cfg.client_dir) / "keys" / f"{owner_id}.json"


def _save_owner_keys(cfg: Config, owner_id: str, keys, policy: str) -> None:
    path = _keys_path(cfg, owner_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({
        "owner_id": owner_id,
        "policy": policy,
        "search_keys": b64e(client.search_keys_to_bytes(keys)),
    }, sort_keys=True))


def _load_owner_keys(cfg: Config, owner_id: str):
    path = _keys_path(cfg, owner_id)
    if not path.exists():
        raise FileNotFoundError(f"no local keys for owner {owner_id!r}, run keygen")
    obj = json.loads(path.read_text())
    return client.search_keys_from_bytes(b64d(obj["search_keys"])), obj["policy"]


def _save_credentials(cfg: Config, user_id: str,
                      creds: list[AttributeCredential]) -> Path:
    path = Path(cfg.client_dir) / "creds" / f"{user_id}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([{
        "attribute": c.attribute,
        "binding": b64e(c.binding),
        "secret": b64e(c.secret),
        "user_id": c.user_id,
    } for c in creds], sort_keys=True))
    return path


def load_credentials(path) -> list[AttributeCredential]:
    entries = json.loads(Path(path).read_text())
    return [AttributeCredential(
        user_id=e["user_id"], attribute=e["attribute"],
        secret=b64d(e["secret"]), binding=b64d(e["binding"]),
    ) for e in entries]


def _client(cfg: Config) -> client.CloudClient:
    return client.CloudClient(cfg.sharing_host, cfg.sharing_port,
                              cfg.search_host, cfg.search_port)


def _query_descriptor(args, cfg: Config, variant: str):
    if args.descriptor:
        desc = load_descriptor(args.descriptor)
        if desc.variant != variant:
            raise VariantMismatch(
                f"descriptor is {desc.variant}, owner keys are {variant}")
        return desc
    if not args.image:
        raise ParseError("query needs --image or --descriptor")
    img = load_pgm(args.image)
    if args.rop:
        rects = load_rop_fixture(args.rop)
        image_id = args.image_id or Path(args.image).stem
        if image_id in rects:
            img = crop(img, rects[image_id])
    return toy_extract(img, cfg.grid, variant)


# ---- commands ----

def cmd_keygen(args, cfg: Config, rng) -> int:
    if args.variant == "bin":
        args.variant = BINARY
    keys_path = _keys_path(cfg, args.owner)
    if keys_path.exists() and not args.force:
        raise ExistingKeys(f"keys for {args.owner!r} exist, use --force to replace")
    policy = access.parse_policy(args.policy)
    if args.variant == REAL:
        params = FixedPointParams(cfg.scale_bits, cfg.range_bits)
        keys = search_real.gen_search_keys(args.dim, cfg.prime_bits, params, rng)
    else:
        keys = search_bin.gen_search_keys_bin(cfg.prime_bits, rng)
    authority = _authority(cfg, rng)
    envelope = access.wrap(policy, client.search_keys_to_bytes(keys), authority, rng)
    _save_owner_keys(cfg, args.owner, keys, args.policy)
    _client(cfg).upload_envelope(args.owner, envelope, int(keys.public_key.n),
                                 args.variant, force=args.force)
    print(f"owner={args.owner} variant={args.variant} "
          f"modulus_bits={int(keys.public_key.n).bit_length()} policy={args.policy}")
    return EXIT_OK


def cmd_grant(args, cfg: Config, rng) -> int:
    authority = _authority(cfg, rng)
    attrs = [a.strip() for a in args.attrs.split(",") if a.strip()]
    if not attrs:
        raise ParseError("no attributes given")
    creds = [access.issue_credential(authority, args.user, a) for a in attrs]
    path = _save_credentials(cfg, args.user, creds)
    print(f"user={args.user} attributes={','.join(attrs)} creds={path}")
    return EXIT_OK


def cmd_upload(args, cfg: Config, rng) -> int:
    keys, policy_str = _load_owner_keys(cfg, args.owner)
    variant = REAL if isinstance(keys, search_real.SearchKeysReal) else BINARY
    img = load_pgm(args.image)
    image_id = args.image_id or Path(args.image).stem
    rects = load_rop_fixture(args.rop)
    if image_id not in rects:
        raise ParseError(f"no privacy rect for image {image_id!r} in {args.rop}")
    rect = rects[image_id]
    if args.descriptor:
        desc = load_descriptor(args.descriptor)
        if desc.variant != variant:
            raise VariantMismatch(
                f"descriptor is {desc.variant}, owner keys are {variant}")
    else:
        desc = toy_extract(crop(img, rect), cfg.grid, variant)
    authority = _authority(cfg, rng)
    policy = access.parse_policy(policy_str)
    bags = client.build_image_bags(img, rect, args.method, desc, keys,
                                   policy, authority, kernel=args.kernel, rng=rng)
    _client(cfg).upload_image(args.owner, image_id, variant, bags)
    print(f"image={image_id} public_bag_bytes={len(bags.public_bag)} "
          f"private_bag_bytes={len(bags.private_bag)} "
          f"search_bag_bytes={len(bags.search_bag)}")
    return EXIT_OK


def _unwrap_search_keys(cfg: Config, owner_id: str, creds_path):
    creds = load_credentials(creds_path)
    envelope, _, variant = _client(cfg).fetch_envelope(owner_id)
    raw = access.unwrap(envelope, creds)
    return client.search_keys_from_bytes(raw), variant, creds


def _recover_retrieved(items: dict, names, creds, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for index in sorted(items):
        public_bytes, private_bytes = items[index]
        public_img = pgm_from_bytes(public_bytes)
        secret = client.open_private_bag(private_bytes, creds)
        original = recover(public_img, secret)
        path = out_dir / f"{names[index]}.pgm"
        save_pgm(original, path)
        written.append(path)
    return written


def cmd_query(args, cfg: Config, rng) -> int:
    keys, variant, creds = _unwrap_search_keys(cfg, args.owner, args.creds)
    desc = _query_descriptor(args, cfg, variant)
    query_bytes = client.encode_query_descriptor(desc, keys, rng)
    cloud = _client(cfg)
    results, manifest = cloud.query(args.owner, variant, query_bytes)
    scores = client.score_query_results(results, keys, cfg.alpha)
    k = args.k
    if k > len(scores):
        print(f"warning: k={k} clamped to {len(scores)} stored images",
              file=sys.stderr)
        k = len(scores)
    ranked = client.rank_results(scores, manifest, k)
    for image_id, index, score in ranked:
        print(f"{image_id} index={index} score={score}")
    if not ranked or args.no_retrieve:
        return EXIT_OK
    sigma = {index for _, index, _ in ranked}
    pad_to = min(max(args.n or cfg.ot_pad_factor * k, len(sigma)), len(manifest))
    choice = pad_choice(sigma, len(manifest), pad_to, rng)
    items = cloud.ot_retrieve(args.owner, choice, rng)
    chosen = {idx: items[idx] for idx in sigma}
    written = _recover_retrieved(chosen, manifest, creds, Path(args.out))
    for path in written:
        print(f"recovered {path}")
    return EXIT_OK


def cmd_retrieve(args, cfg: Config, rng) -> int:
    _, _, creds = _unwrap_search_keys(cfg, args.owner, args.creds)
    sigma = {int(v) for v in args.indices.split(",")}
    store_size = args.store_size or (max(sigma) + 1)
    pad_to = min(max(args.n or cfg.ot_pad_factor * len(sigma), len(sigma)),
                 store_size)
    choice = pad_choice(sigma, store_size, pad_to, rng)
    items = _client(cfg).ot_retrieve(args.owner, choice, rng)
    names = {idx: f"index{idx:04d}" for idx in items}
    written = _recover_retrieved(items, names, creds, Path(args.out))
    for path in written:
        print(f"recovered {path}")
    return EXIT_OK


def cmd_bench(args, cfg: Config, rng) -> int:
    rows = []
    for variant in args.variant.split(","):
        rows.extend(bench.run_bench(variant.strip(), args.dim, args.trials,
                                    args.prime_bits or cfg.prime_bits, rng))
    csv = bench.to_csv(rows)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_serve(args, cfg: Config, rng) -> int:
    store = CloudStore(cfg.data_dir)
    servers = []
    if args.role in ("sharing", "both"):
        servers.append(CloudServer((cfg.sharing_host, cfg.sharing_port), store,
                                   "sharing", rng=rng))
    if args.role in ("search", "both"):
        servers.append(CloudServer((cfg.search_host, cfg.search_port), store,
                                   "search", workers=cfg.workers))
    for srv in servers:
        print(f"listening on {srv.server_address}")
        threading.Thread(target=srv.serve_forever, daemon=True).start()
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        for srv in servers:
            srv.shutdown()
    return EXIT_OK


# ---- argument plumbing ----

_OVERRIDE_FLAGS = (
    ("data_dir", str), ("client_dir", str),
    ("sharing_host", str), ("sharing_port", int),
    ("search_host", str), ("search_port", int),
    ("prime_bits", int), ("scale_bits", int), ("alpha", float),
    ("grid", int), ("workers", int), ("ot_pad_factor", int),
)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="privshare", description=__doc__)
    ap.add_argument("--config", help="path to key=value config file")
    ap.add_argument("--seed", type=int, default=None,
                    help="deterministic randomness for reproducible runs")
    for name, kind in _OVERRIDE_FLAGS:
        ap.add_argument(f"--{name.replace('_', '-')}", dest=f"cfg_{name}",
                        type=kind, default=None, help=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate and publish owner search keys")
    p.add_argument("--owner", required=True)
    p.add_argument("--variant", choices=(REAL, BINARY, "bin"), default=REAL)
    p.add_argument("--policy", required=True,
                   help="e.g. AND(friend,OR(family,coworker))")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("grant", help="issue attribute credentials to a user")
    p.add_argument("--user", required=True)
    p.add_argument("--attrs", required=True, help="comma-separated attribute names")
    p.set_defaults(fn=cmd_grant)

    p = sub.add_parser("upload", help="separate, seal, encrypt, and upload an image")
    p.add_argument("--owner", required=True)
    p.add_argument("--image", required=True, help="binary PGM path")
    p.add_argument("--rop", required=True, help="privacy-rect fixture file")
    p.add_argument("--method", choices=("mask", "blur"), default="blur")
    p.add_argument("--kernel", type=int, default=None)
    p.add_argument("--image-id", default=None)
    p.add_argument("--descriptor", default=None,
                   help="load descriptor file instead of toy extraction")
    p.set_defaults(fn=cmd_upload)

    p = sub.add_parser("query", help="end-to-end encrypted search and retrieval")
    p.add_argument("--creds", required=True)
    p.add_argument("--owner", required=True)
    p.add_argument("--image", default=None)
    p.add_argument("--descriptor", default=None)
    p.add_argument("--rop", default=None)
    p.add_argument("--image-id", default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--n", type=int, default=None,
                   help="padded retrieval size (default 4k)")
    p.add_argument("--out", default="./retrieved")
    p.add_argument("--no-retrieve", action="store_true")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("retrieve", help="obliviously retrieve images by index")
    p.add_argument("--creds", required=True)
    p.add_argument("--owner", required=True)
    p.add_argument("--indices", required=True, help="comma-separated indices")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--store-size", type=int, default=None)
    p.add_argument("--out", default="./retrieved")
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("bench", help="microbenchmark CSV")
    p.add_argument("--variant", default="real,binary")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--prime-bits", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve", help="run the cloud endpoints")
    p.add_argument("--role", choices=("sharing", "search", "both"), default="both")
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        for name, _ in _OVERRIDE_FLAGS:
            value = getattr(args, f"cfg_{name}")
            if value is not None:
                setattr(cfg, name, value)
        rng = random.Random(args.seed) if args.seed is not None else random.SystemRandom()
        return args.fn(args, cfg, rng)
    except AccessDenied as exc:
        print(f"access denied: {exc}", file=sys.stderr)
        return EXIT_ACCESS
    except (ParseError, UnsupportedFormat, FileNotFoundError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PrivShareError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
