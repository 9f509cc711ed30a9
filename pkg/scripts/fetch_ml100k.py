"""Fetch MovieLens 100K ``u.data`` into ``data/ml-100k/``.

The GroupLens host is not always reachable, so this falls back to the copy of
``u.data`` bundled (as ``ml-100k.inter``) inside the RecBole wheel on PyPI.
The header line of that file is dropped; rows are byte-identical to ``u.data``.
"""
import argparse
import hashlib
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
WHEEL_MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def from_grouplens(timeout: float) -> bytes:
    with urllib.request.urlopen(GROUPLENS_URL, timeout=timeout) as resp:
        payload = resp.read()
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        return zf.read("ml-100k/u.data")


def from_recbole_wheel() -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "recbole==1.2.1", "--no-deps", "-d", tmp, "-q"],
            check=True,
        )
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            raw = zf.read(WHEEL_MEMBER)
    lines = raw.split(b"\n")
    return b"\n".join(lines[1:])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "ml-100k"))
    parser.add_argument("--timeout", type=float, default=15.0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "u.data"
    try:
        data = from_grouplens(args.timeout)
        source = "grouplens"
    except Exception as exc:  # network unavailable, fall back to PyPI
        print(f"grouplens download failed ({exc}); using recbole wheel", file=sys.stderr)
        data = from_recbole_wheel()
        source = "recbole wheel"
    if not data.endswith(b"\n"):
        data += b"\n"
    target.write_bytes(data)
    n_rows = data.count(b"\n")
    print(f"wrote {target} ({n_rows} rows, sha256 {hashlib.sha256(data).hexdigest()[:16]}, from {source})")
    return 0 if n_rows == 100_000 else 1


if __name__ == "__main__":
    sys.exit(main())
