#!/usr/bin/env python3
"""One-shot demo: spin up both cloud endpoints in-process, run the full
owner and querier lifecycle through the CLI, and leave the recovered
images in ./demo-out.  Uses small test keys so it finishes in seconds."""

import random
import subprocess
import sys
import tempfile
import threading
from pathlib import Path

from privshare import cli
from privshare.cloud import CloudServer, CloudStore


def main() -> int:
    tmp = Path(tempfile.mkdtemp(prefix="privshare-demo-"))
    corpus = tmp / "corpus"
    subprocess.run([sys.executable, str(Path(__file__).parent / "make_demo_corpus.py"),
                    "--out", str(corpus), "--count", "8"], check=True)

    store = CloudStore(tmp / "clouds")
    server = CloudServer(("127.0.0.1", 0), store, "both", workers=2,
                         rng=random.Random())
    threading.Thread(target=server.serve_forever, daemon=True).start()
    port = server.server_address[1]

    cfg = tmp / "config.txt"
    cfg.write_text(f"client_dir = {tmp}/client\n"
                   f"sharing_port = {port}\nsearch_port = {port}\n"
                   "prime_bits = 256\ngrid = 3\n")
    base = ["--config", str(cfg), "--seed", "1"]

    def run(*argv):
        rc = cli.main(base + list(argv))
        if rc != 0:
            raise SystemExit(f"command failed ({rc}): {argv}")

    run("keygen", "--owner", "demo", "--variant", "real",
        "--policy", "AND(friend,family)", "--dim", "64")
    run("grant", "--user", "viewer", "--attrs", "friend,family")
    for path in sorted(corpus.glob("*.pgm")):
        run("upload", "--owner", "demo", "--image", str(path),
            "--rop", str(corpus / "rects.txt"), "--method", "blur")
    creds = f"{tmp}/client/creds/viewer.json"
    run("query", "--creds", creds, "--owner", "demo",
        "--image", str(corpus / "img003.pgm"), "--rop", str(corpus / "rects.txt"),
        "--image-id", "img003", "--k", "3", "--out", "./demo-out")
    server.shutdown()
    print("demo complete; recovered images in ./demo-out")
    return 0


if __name__ == "__main__":
    sys.exit(main())
