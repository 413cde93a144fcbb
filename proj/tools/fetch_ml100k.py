#!/usr/bin/env python3
# Copyright 2026 The FedMMF Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Materialize MovieLens 100K in its original GroupLens layout.

Tries, in order:
  1. the official zip from files.grouplens.org;
  2. the copy bundled inside the RecBole wheel (fetched with `pip download`),
     rewritten into the u.data / u.user / u.item layout.

The ratings file is line-identical to the official u.data in both cases.
When rebuilt from RecBole, u.item carries year-only release dates and
u.user is exact.
"""

import argparse
import glob
import io
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def from_grouplens(out_dir):
    with urllib.request.urlopen(GROUPLENS_URL, timeout=20) as resp:
        blob = resp.read()
    with zipfile.ZipFile(io.BytesIO(blob)) as z:
        for name in ("u.data", "u.user", "u.item"):
            with z.open("ml-100k/" + name) as src, \
                    open(os.path.join(out_dir, name), "wb") as dst:
                dst.write(src.read())


def _read_atomic(z, member):
    with z.open(member) as f:
        lines = f.read().decode("latin-1").splitlines()
    return [line.split("\t") for line in lines[1:] if line]


def from_recbole(out_dir):
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
             "-d", tmp, "recbole"],
            check=True)
        wheel = glob.glob(os.path.join(tmp, "recbole-*.whl"))[0]
        prefix = "recbole/dataset_example/ml-100k/ml-100k"
        with zipfile.ZipFile(wheel) as z:
            inter = _read_atomic(z, prefix + ".inter")
            users = _read_atomic(z, prefix + ".user")
            items = _read_atomic(z, prefix + ".item")

    with open(os.path.join(out_dir, "u.data"), "w", newline="\n") as f:
        for row in inter:
            f.write("\t".join(row[:4]) + "\n")

    with open(os.path.join(out_dir, "u.user"), "w", newline="\n") as f:
        for row in users:
            f.write("|".join(row[:5]) + "\n")

    with open(os.path.join(out_dir, "u.item"), "w", newline="\n",
              encoding="latin-1") as f:
        for row in items:
            item_id, title, year = row[0], row[1], row[2]
            classes = set(row[3].split()) if len(row) > 3 else set()
            date = "01-Jan-%s" % year if year.strip() else ""
            full_title = "%s (%s)" % (title, year) if year.strip() else title
            flags = ["1" if g in classes else "0" for g in GENRES]
            if not any(f == "1" for f in flags):
                flags[0] = "1"
            f.write("|".join([item_id, full_title, date, "", ""] + flags) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "ml-100k"))
    args = parser.parse_args()
    out_dir = os.path.abspath(args.out)
    os.makedirs(out_dir, exist_ok=True)

    try:
        from_grouplens(out_dir)
        print("fetched ml-100k from grouplens into", out_dir)
        return
    except Exception as exc:  # network blocked or unavailable
        print("grouplens download failed (%s); trying recbole wheel" % exc,
              file=sys.stderr)
    from_recbole(out_dir)
    print("rebuilt ml-100k from recbole wheel into", out_dir)


if __name__ == "__main__":
    main()
