#!/usr/bin/env python3
"""Materialize MovieLens 100K in its original u.data / u.item / u.user layout.

The GroupLens host is often unreachable from build machines, so this pulls the
copy bundled inside the RecBole wheel on PyPI and rewrites its atomic files
into the classic ML-100K format. Usage:

    python3 tools/fetch_ml100k.py [output_dir]     # default: data/ml-100k
"""

import glob
import os
import subprocess
import sys
import tempfile
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/ml-100k."


def rows(blob):
    lines = blob.decode("latin-1").splitlines()
    return [line.split("\t") for line in lines[1:] if line]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "ml-100k")
    os.makedirs(out, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps",
                        "recbole==1.2.1", "-d", tmp, "-q"], check=True)
        wheel = zipfile.ZipFile(glob.glob(os.path.join(tmp, "recbole-*.whl"))[0])
        inter = rows(wheel.read(PREFIX + "inter"))
        items = rows(wheel.read(PREFIX + "item"))
        users = rows(wheel.read(PREFIX + "user"))

    with open(os.path.join(out, "u.data"), "w", encoding="latin-1") as f:
        for user, item, rating, ts in inter:
            f.write(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}\n")

    with open(os.path.join(out, "u.item"), "w", encoding="latin-1") as f:
        for row in sorted(items, key=lambda r: int(r[0])):
            item, title, year = row[0], row[1], row[2]
            tokens = row[3].split() if len(row) > 3 else []
            flags = ["1" if g in tokens else "0" for g in GENRES]
            if not any(f == "1" for f in flags):
                flags[0] = "1"
            f.write("|".join([item, f"{title} ({year})", year, "", ""] + flags) + "\n")

    with open(os.path.join(out, "u.user"), "w", encoding="latin-1") as f:
        for user, age, gender, occupation, zipcode in sorted(users, key=lambda r: int(r[0])):
            f.write(f"{user}|{age}|{gender}|{occupation}|{zipcode}\n")

    print(f"wrote {len(inter)} ratings, {len(items)} items, {len(users)} users to {out}")


if __name__ == "__main__":
    main()
