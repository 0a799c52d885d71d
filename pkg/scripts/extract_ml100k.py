"""Write MovieLens 100K ``u.data`` / ``u.user`` files from a local copy.

The sandbox this project is developed in has no route to grouplens.org, but
the ``pytorch-widedeep`` wheel bundles the 100K ratings and user tables as
parquet files.  This script unpacks them back into the original MovieLens
text layout so the ingest code can be exercised on the real files.

Usage::

    pip download --no-deps pytorch-widedeep -d /tmp/wd
    python scripts/extract_ml100k.py /tmp/wd/pytorch_widedeep-*.whl data/ml-100k
"""

import argparse
import io
import zipfile
from pathlib import Path

import pandas as pd

MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_{}.parquet.brotli"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheel", type=Path)
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()

    with zipfile.ZipFile(args.wheel) as zf:
        ratings = pd.read_parquet(io.BytesIO(zf.read(MEMBER.format("data"))))
        users = pd.read_parquet(io.BytesIO(zf.read(MEMBER.format("users"))))

    args.out_dir.mkdir(parents=True, exist_ok=True)
    ratings = ratings[["user_id", "movie_id", "rating", "timestamp"]]
    ratings.to_csv(args.out_dir / "u.data", sep="\t", header=False, index=False)
    users = users[["user_id", "age", "gender", "occupation", "zip_code"]]
    users.to_csv(args.out_dir / "u.user", sep="|", header=False, index=False)
    print(f"wrote {len(ratings)} ratings and {len(users)} users to {args.out_dir}")


if __name__ == "__main__":
    main()
