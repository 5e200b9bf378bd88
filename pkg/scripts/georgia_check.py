"""Row count and raw-speed tier shares of a tile extract.

    python scripts/georgia_check.py georgia_tiles.csv

Converting an Ookla parquet download first (needs pandas + pyarrow):

    python -c "import pandas as pd; pd.read_parquet('tiles.parquet').to_csv('tiles.csv', index=False)"
"""

import argparse

from netqual.data_model import read_dataset
from netqual.evaluation import classify_service_array, tier_shares


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    args = ap.parse_args()
    ds = read_dataset(args.csv)
    shares = tier_shares(classify_service_array(ds.download_kbps / 1000.0, ds.upload_kbps / 1000.0))
    print(f"tiles = {len(ds)}")
    for tier, share in sorted(shares.items(), reverse=True):
        print(f"{tier.name.lower():>12} = {100 * share:.1f}%")


if __name__ == "__main__":
    main()
