#!/usr/bin/env python3
"""Write MovieLens-100k as `user<TAB>item<TAB>rating<TAB>timestamp` to data/ml-100k.tsv.

Tries the GroupLens archive first, then falls back to the copy bundled in the
pytorch-widedeep wheel (fetched with `pip download`).
"""
import glob
import io
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "ml-100k.tsv")
URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"


def from_grouplens():
    with urllib.request.urlopen(URL, timeout=30) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    return archive.read("ml-100k/u.data").decode("utf-8")


def from_widedeep_wheel():
    import pandas as pd

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "pytorch-widedeep==1.7.0", "-d", tmp],
            check=True,
        )
        wheel = zipfile.ZipFile(glob.glob(os.path.join(tmp, "*.whl"))[0])
        raw = wheel.read("pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli")
    df = pd.read_parquet(io.BytesIO(raw))
    rows = df[["user_id", "movie_id", "rating", "timestamp"]].itertuples(index=False)
    return "".join(f"{u}\t{i}\t{r}\t{t}\n" for u, i, r, t in rows)


def main():
    try:
        text = from_grouplens()
    except Exception as err:  # noqa: BLE001
        print(f"grouplens download failed ({err}); using pytorch-widedeep copy", file=sys.stderr)
        text = from_widedeep_wheel()
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {text.count(chr(10))} records to {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
