#!/usr/bin/env python3
"""Prepare MovieLens 100k ratings plus director/actor metadata under data/ml-100k.

The ratings file is written in the original u.data layout
(user<TAB>item<TAB>rating<TAB>timestamp). Person metadata is written as
"item|role|person1;person2;..." lines, one file per role. Persons are
identified by their Freebase ids.

Sources: the MovieLens 100k copy and Freebase knowledge-graph slice that
ship inside the `recbole` wheel. The wheel is fetched with `pip download`
unless --wheel points at a local copy.
"""

import argparse
import collections
import csv
import glob
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

PREFIX = "recbole/dataset_example/ml-100k/"
ROLES = {
    "director": "film.film.directed_by",
    "actor": "film.film.actor",
}


def fetch_wheel(dest: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "recbole==1.2.1", "--no-deps",
         "-d", str(dest)],
        check=True,
    )
    wheels = glob.glob(str(dest / "recbole-*.whl"))
    if not wheels:
        sys.exit("recbole wheel not found after download")
    return pathlib.Path(wheels[0])


def read_tsv(zf: zipfile.ZipFile, name: str):
    with zf.open(PREFIX + name) as fh:
        rows = list(csv.reader(io.TextIOWrapper(fh, encoding="utf-8"), delimiter="\t"))
    return rows[1:]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "ml-100k"))
    parser.add_argument("--wheel", help="local recbole wheel")
    args = parser.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        wheel = pathlib.Path(args.wheel) if args.wheel else fetch_wheel(pathlib.Path(tmp))
        with zipfile.ZipFile(wheel) as zf:
            inter = read_tsv(zf, "ml-100k.inter")
            link = read_tsv(zf, "ml-100k.link")
            kg = read_tsv(zf, "ml-100k.kg")

    with open(out / "ratings.tsv", "w", encoding="utf-8", newline="") as fh:
        for user, item, rating, ts in inter:
            fh.write(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}\n")

    entity_to_item = {entity: item for item, entity in link}
    for role, relation in ROLES.items():
        persons = collections.defaultdict(list)
        for head, rel, tail in kg:
            if rel != relation or head not in entity_to_item:
                continue
            bucket = persons[entity_to_item[head]]
            if tail not in bucket:
                bucket.append(tail)
        with open(out / f"{role}s.txt", "w", encoding="utf-8") as fh:
            for item in sorted(persons, key=int):
                fh.write(f"{item}|{role}|{';'.join(persons[item])}\n")

    print(f"wrote {len(inter)} ratings and metadata to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
