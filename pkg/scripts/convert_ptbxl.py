#!/usr/bin/env python3
"""Convert a local PTB-XL download into the interchange format.

Expects the official layout (ptbxl_database.csv plus records100/ WFDB
files) and writes manifest.csv + signals/*.f32 restricted to the 71 codes
of the built-in taxonomy, keeping the published strat_fold assignment.
Requires the optional wfdb and pandas packages.

Usage:
  python scripts/convert_ptbxl.py --ptbxl /path/to/ptb-xl --out data_ptbxl
Then:
  ecgproto preprocess --manifest data_ptbxl/manifest.csv \
      --signals data_ptbxl/signals --out data_ptbxl_filtered
"""

import argparse
import ast
import csv
from pathlib import Path

import numpy as np

from ecgproto.taxonomy import ptbxl_taxonomy


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--ptbxl", required=True, help="PTB-XL root directory")
    parser.add_argument("--out", required=True)
    parser.add_argument("--limit", type=int, help="convert only the first N records")
    args = parser.parse_args()

    try:
        import pandas as pd
        import wfdb
    except ImportError as exc:
        raise SystemExit(
            f"missing optional dependency ({exc.name}); "
            "pip install wfdb pandas to run the converter"
        )

    root = Path(args.ptbxl)
    out = Path(args.out)
    (out / "signals").mkdir(parents=True, exist_ok=True)
    taxonomy = ptbxl_taxonomy()
    known = set(taxonomy.codes)

    df = pd.read_csv(root / "ptbxl_database.csv", index_col="ecg_id")
    if args.limit:
        df = df.iloc[: args.limit]
    rows = []
    for ecg_id, row in df.iterrows():
        codes = [c for c in ast.literal_eval(row["scp_codes"]) if c in known]
        rec = wfdb.rdrecord(str(root / row["filename_lr"]))
        signal = rec.p_signal.T.astype("<f4")  # (12, 1000) mV
        if signal.shape != (12, 1000):
            print(f"skipping {ecg_id}: shape {signal.shape}")
            continue
        rec_id = f"ptbxl{int(ecg_id):06d}"
        signal.tofile(out / "signals" / f"{rec_id}.f32")
        rows.append([rec_id, int(row["strat_fold"]), ";".join(codes)])
    with open(out / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "fold", "codes"])
        writer.writerows(rows)
    (out / "taxonomy.json").write_text(taxonomy.to_json(), encoding="utf-8")
    print(f"converted {len(rows)} records -> {out}")


if __name__ == "__main__":
    main()
