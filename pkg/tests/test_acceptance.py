"""Acceptance gate: the platform-level guarantees, one test per criterion.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see
them live). Budgets are wall-clock and generous for CI noise; the work
itself is deterministic via seeded RNGs.
"""

import functools
import random
import socket
import string
import subprocess
import sys
import time
from pathlib import Path

import httpx

from ctf_vault.fixtures import (
    make_manifest,
    registry_from_counts,
    solves_for_counts,
    write_challenge_dir,
)
from ctf_vault.flagcheck import digest_flag, generate_check, serialize_record, verify
from ctf_vault.registry import Category, EndpointSpec
from ctf_vault.sandbox import (
    InstanceManager,
    InstanceState,
    LocalProcessDriver,
    NotRunning,
    QuotaExceeded,
    compile_build_plan,
    render_build_recipe,
)
from ctf_vault.service import Platform
from ctf_vault.store import SolveLog, SolveRecord

from sha256_oracle import sha256_hex

# Published per-category coverage and solve counts for the archived corpus.
TABLE_AVAILABLE = {
    Category.CRYPTOGRAPHY: 261,
    Category.BINARY_EXPLOITATION: 168,
    Category.REVERSE_ENGINEERING: 125,
    Category.WEB_EXPLOITATION: 26,
    Category.FORENSICS: 43,
    Category.OSINT: 17,
    Category.BLOCKCHAIN: 2,
    Category.RADIO_FREQUENCY: 2,
    Category.SOCIAL_ENGINEERING: 1,
    Category.STEGANOGRAPHY: 1,
    Category.MISC: 54,
}
TABLE_SOLVES = {
    Category.CRYPTOGRAPHY: 5204,
    Category.BINARY_EXPLOITATION: 504,
    Category.REVERSE_ENGINEERING: 856,
    Category.WEB_EXPLOITATION: 220,
    Category.FORENSICS: 160,
    Category.OSINT: 71,
    Category.BLOCKCHAIN: 2,
    Category.RADIO_FREQUENCY: 8,
    Category.SOCIAL_ENGINEERING: 2,
    Category.STEGANOGRAPHY: 4,
    Category.MISC: 364,
}
TABLE_TOTAL_AVAILABLE = 700
TABLE_TOTAL_SOLVES = 7395


def criterion(name, budget=None):
    """Time the body, print one PASS/FAIL line, enforce the budget."""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.monotonic()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL {name}")
                raise
            elapsed = time.monotonic() - start
            if budget is not None and elapsed > budget:
                print(f"FAIL {name} ({elapsed:.2f}s over {budget:.0f}s budget)")
                raise AssertionError(f"{name} took {elapsed:.2f}s, budget {budget}s")
            print(f"PASS {name} ({elapsed:.2f}s)")

        return wrapper

    return decorate


@criterion("table-reproduction", budget=5.0)
def test_table_reproduction(tmp_path):
    registry = registry_from_counts(TABLE_AVAILABLE)
    solves = SolveLog()
    for record in solves_for_counts(registry, TABLE_SOLVES):
        solves.append(record)

    platform = Platform(
        registry,
        solves,
        InstanceManager(LocalProcessDriver(), tmp_path),
        auth_tokens={},
    )
    rows = {r["category"]: r for r in platform.handle_stats()["rows"]}

    for category in Category:
        row = rows[category.label]
        assert row["available"] == TABLE_AVAILABLE[category], category
        assert row["solves"] == TABLE_SOLVES[category], category
    assert rows["Total"]["available"] == TABLE_TOTAL_AVAILABLE
    assert rows["Total"]["solves"] == TABLE_TOTAL_SOLVES


@criterion("flagcheck-round-trip", budget=10.0)
def test_flagcheck_round_trip():
    rng = random.Random(0xF1A6)
    alphabet = string.ascii_letters + string.digits + string.punctuation + " "

    for i in range(1000):
        flag = "".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 41)))
        platform_flag = f"vault{{{rng.randrange(10**9)}}}"
        record = generate_check(flag, platform_flag, f"chal-{i}")

        verdict = verify(record, flag)
        assert verdict.accepted and verdict.platform_flag == platform_flag

        pos = rng.randrange(len(flag))
        repl = rng.choice(alphabet.replace(flag[pos], "") or "x")
        mutated = flag[:pos] + repl + flag[pos + 1 :]
        assert not verify(record, mutated).accepted

        assert record.digest == sha256_hex(flag.encode("utf-8"))
        assert digest_flag(mutated) == sha256_hex(mutated.encode("utf-8"))


@criterion("no-leak")
def test_no_leak():
    rng = random.Random(0x5EC2E7)
    alphabet = string.ascii_letters + string.digits + "_-{}!@#$%"
    for i in range(500):
        flag = "".join(rng.choice(alphabet) for _ in range(rng.randrange(8, 64)))
        record = generate_check(flag, f"vault{{{i}}}", f"chal-{i}")
        serialized = serialize_record(record)
        assert flag not in serialized
        assert flag not in repr(record)


@criterion("build-determinism")
def test_build_determinism(tmp_path):
    manifests = [
        make_manifest("det-0", artifacts=("dist/handout.txt",)),
        make_manifest("det-1", artifacts=("dist/a.bin", "dist/b.bin")),
        make_manifest("det-2", endpoints=(EndpointSpec("tcp", 31337),)),
        make_manifest(
            "det-3",
            artifacts=("dist/chal",),
            endpoints=(EndpointSpec("tcp", 1337), EndpointSpec("http", 8080)),
        ),
        make_manifest("det-4", artifacts=("dist/deep/nested/leaf.so",)),
        make_manifest("det-5", endpoints=(EndpointSpec("http", 8080),)),
        make_manifest("det-6", artifacts=("dist/x",), endpoints=(EndpointSpec("ssh", 22),)),
        make_manifest("det-7", artifacts=("dist/y.tar.gz",)),
        make_manifest("det-8", endpoints=(EndpointSpec("tcp", 65535),)),
        make_manifest("det-9", artifacts=("dist/z",)),
    ]
    dirs = {}
    for i, manifest in enumerate(manifests):
        src_files = {"main.c": "int main(void) { return 0; }\n"} if i % 3 == 0 else None
        dirs[manifest.id] = write_challenge_dir(tmp_path, manifest, src_files=src_files)
    assert len(manifests) == 10

    outputs = []
    for _run in range(3):
        rendered = []
        for manifest in manifests:
            plan = compile_build_plan(manifest, dirs[manifest.id])
            rendered.append(render_build_recipe(plan))
        outputs.append("\x00".join(rendered).encode("utf-8"))

    assert outputs[0] == outputs[1] == outputs[2]
    # path-separator independence: all image paths are POSIX, regardless
    # of the host convention
    assert b"\\" not in outputs[0]


@criterion("lifecycle-model-check")
def test_lifecycle_model_check(tmp_path):
    rng = random.Random(0x11FE)
    mgr = InstanceManager(LocalProcessDriver(), tmp_path / "data", quota=1)

    quiet = make_manifest("model-quiet", artifacts=("dist/handout.txt",))
    noisy = make_manifest(
        "model-noisy",
        artifacts=("dist/chal",),
        endpoints=(EndpointSpec("tcp", 31337),),
    )
    dirs = {
        m.id: write_challenge_dir(tmp_path, m) for m in (quiet, noisy)
    }
    plans = {
        m.id: compile_build_plan(m, dirs[m.id]) for m in (quiet, noisy)
    }

    users = [f"user-{i}" for i in range(20)]
    model_active = {u: 0 for u in users}  # the oracle's quota view
    model_state: dict[str, str] = {}  # instance -> running|stopped
    running: list[str] = []
    retired: list[str] = []
    launches = 0

    for step in range(10_000):
        roll = rng.random()
        if roll < 0.5 or not running:
            user = rng.choice(users)
            # listeners are expensive at this volume; bind a real socket
            # only on a small sample of launches
            manifest = noisy if step % 100 == 0 else quiet
            plan = plans[manifest.id]
            if model_active[user] >= 1:
                try:
                    mgr.launch(user, manifest, plan)
                    raise AssertionError(f"step {step}: quota not enforced for {user}")
                except QuotaExceeded:
                    pass
            else:
                handle = mgr.launch(user, manifest, plan)
                assert handle.state is InstanceState.RUNNING
                launches += 1
                model_active[user] += 1
                model_state[handle.instance_id] = "running"
                running.append(handle.instance_id)
        elif roll < 0.55:
            try:
                mgr.stop(f"inst-{step:012x}")
                raise AssertionError(f"step {step}: stop of unknown instance succeeded")
            except NotRunning:
                pass
        elif roll < 0.62 and retired:
            instance_id = rng.choice(retired)
            try:
                mgr.stop(instance_id)
                raise AssertionError(f"step {step}: double stop succeeded")
            except NotRunning:
                pass
        else:
            instance_id = running.pop(rng.randrange(len(running)))
            handle = mgr.stop(instance_id)
            assert handle.state is InstanceState.STOPPED
            model_state[instance_id] = "stopped"
            model_active[mgr.owner_of(instance_id)] -= 1
            retired.append(instance_id)

    assert launches > 1500, f"model run too shallow: only {launches} launches"

    legal = {
        (None, InstanceState.CREATED),
        (InstanceState.CREATED, InstanceState.RUNNING),
        (InstanceState.RUNNING, InstanceState.STOPPED),
    }
    assert mgr.transitions, "model run recorded no transitions"
    for instance_id, old, new in mgr.transitions:
        assert (old, new) in legal, f"illegal transition {old} -> {new} on {instance_id}"

    # final states agree with the model
    for instance_id, expected in model_state.items():
        handle = mgr.get(instance_id)
        assert handle is not None and handle.state.value == expected

    mgr.stop_all()


@criterion("store-crash-tolerance")
def test_store_crash_tolerance(tmp_path):
    path = tmp_path / "solves.log"
    log = SolveLog(path)
    records = [
        SolveRecord(f"user-{i % 97}", f"chal-{i}", 1_700_000_000 + i) for i in range(1000)
    ]
    for record in records:
        log.append(record)
    log.close()

    data = path.read_bytes()
    lines = data.split(b"\n")
    assert len(lines) == 1001  # 1000 records + empty tail
    # cut mid-way through the final record, simulating a torn write
    torn = data[: len(data) - (len(lines[999]) // 2) - 1]
    path.write_bytes(torn)

    reloaded = SolveLog.load(path)
    assert len(reloaded) == 999
    assert len(reloaded.warnings) == 1
    assert list(reloaded.records()) == records[:999]


@criterion("end-to-end", budget=30.0)
def test_end_to_end(tmp_path):
    flag = "flag{e2e-accept}"
    manifest = make_manifest(
        "e2e-crypto",
        category=Category.CRYPTOGRAPHY,
        flag=flag,
        hashed=True,
        artifacts=("dist/handout.txt",),
        endpoints=(EndpointSpec("tcp", 1337),),
    )
    root = tmp_path / "archive"
    write_challenge_dir(root, manifest)

    from ctf_vault.cli import main

    assert main(["validate", str(root)]) == 0

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    data_dir = tmp_path / "data"
    config_path = tmp_path / "vault.yaml"
    config_path.write_text(
        f"archive:\n  root: {root}\n"
        f"data:\n  dir: {data_dir}\n"
        f"server:\n  listen: 127.0.0.1:{port}\n"
        "auth:\n  tokens:\n    e2e-token: player\n",
        encoding="utf-8",
    )

    proc = subprocess.Popen(
        [sys.executable, "-m", "ctf_vault", "serve", "--config", str(config_path)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    base = f"http://127.0.0.1:{port}"
    headers = {"Authorization": "Bearer e2e-token"}
    try:
        deadline = time.monotonic() + 20
        while True:
            try:
                if httpx.get(f"{base}/api/stats/categories", headers=headers, timeout=2).status_code == 200:
                    break
            except httpx.TransportError:
                pass
            assert time.monotonic() < deadline, "service did not come up"
            time.sleep(0.2)

        created = httpx.post(
            f"{base}/api/instances",
            headers=headers,
            json={"challenge": "e2e-crypto"},
            timeout=10,
        )
        assert created.status_code == 200, created.text
        [endpoint] = created.json()["endpoints"]
        with socket.create_connection((endpoint["host"], endpoint["port"]), timeout=5) as conn:
            assert conn.recv(64) == b"e2e-crypto\n"

        submitted = httpx.post(
            f"{base}/api/challenges/e2e-crypto/submit",
            headers=headers,
            json={"flag": flag},
            timeout=10,
        )
        body = submitted.json()
        assert body["verdict"] == "correct"
        assert body["platform_flag"] == "vault{e2e-crypto}"
        assert body["first_solve"] is True

        rows = {
            r["category"]: r
            for r in httpx.get(f"{base}/api/stats/categories", headers=headers, timeout=10).json()["rows"]
        }
        assert rows["Cryptography"]["solves"] == 1
        assert rows["Cryptography"]["available"] == 1
        assert rows["Total"]["solves"] == 1
    finally:
        proc.terminate()
        try:
            proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait(timeout=10)
