import json
import os
import pathlib
import struct
import subprocess

import pytest


def _env_path(name):
    value = os.environ.get(name)
    if not value:
        pytest.exit(f"{name} is not set; run this suite through ctest", returncode=2)
    return pathlib.Path(value)


@pytest.fixture(scope="session")
def cli():
    exe = _env_path("SUPWMA_CLI")

    def run(*args, check=None):
        proc = subprocess.run([str(exe), *map(str, args)], capture_output=True, text=True,
                              env={**os.environ, "SUPWMA_LOG": "error"})
        if check is not None:
            assert proc.returncode == check, f"exit {proc.returncode}\nstdout:\n{proc.stdout}\nstderr:\n{proc.stderr}"
        return proc

    return run


@pytest.fixture(scope="session")
def schema_dir():
    return _env_path("SUPWMA_SCHEMAS")


@pytest.fixture(scope="session")
def library_path():
    return _env_path("SUPWMA_LIBRARY")


@pytest.fixture(scope="session")
def small_corpus(cli, tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    cli("gen-data", "--out", out, "--seed", 11, "--clusters", 3, "--per-cluster", 80,
        "--confusable-pairs", 0, check=0)
    return out


@pytest.fixture(scope="session")
def trained(cli, small_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    proc = cli("train", "--data", small_corpus, "--out", out, "--phase", "both", "--epochs-scl", 3,
               "--epochs-cls", 15, "--batch-scl", 64, "--batch-cls", 64, check=0)
    return out, json.loads(proc.stdout)


def read_slp(path):
    data = pathlib.Path(path).read_bytes()
    assert data[:4] == b"SLP1"
    (count,) = struct.unpack_from("<I", data, 4)
    offset, lines = 8, []
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, offset)
        offset += 2
        lines.append(data[offset:offset + 12 * n])
        offset += 12 * n
    assert offset == len(data)
    return lines


def write_slp(path, lines):
    with open(path, "wb") as f:
        f.write(b"SLP1" + struct.pack("<I", len(lines)))
        for raw in lines:
            f.write(struct.pack("<H", len(raw) // 12) + raw)


def read_labels(path):
    rows = pathlib.Path(path).read_text().split()
    assert rows[0] == "index,label"
    return [int(r.split(",")[1]) for r in rows[1:]]


def write_labels(path, labels):
    pathlib.Path(path).write_text("index,label\n" + "".join(f"{i},{v}\n" for i, v in enumerate(labels)))


def read_checkpoint(path):
    """Returns (header dict, parameter blob bytes)."""
    data = pathlib.Path(path).read_bytes()
    magic_len = 8
    version, header_len = struct.unpack_from("<IQ", data, magic_len)
    start = magic_len + 12
    header = json.loads(data[start:start + header_len])
    return header, data[start + header_len:]
