"""Run the desk-scale sweeps and print a compact summary of each CSV.

    python scripts/run_experiments.py [config.json] [out_dir]

Defaults to scripts/desk.json and results/. Same output as ``sealmark bench``
plus a per-experiment table of the aggregate rows.
"""

import logging
import sys
from collections import defaultdict
from pathlib import Path

from sealmark import bench

HERE = Path(__file__).resolve().parent


def summarize(name: str, records: list[bench.ExperimentRecord]) -> None:
    table = defaultdict(dict)
    for r in records:
        if r.image != "ALL":
            continue
        row = (r.experiment, r.metric, r.delta if name != "ber" else r.gamma)
        col = r.quality if r.quality is not None else r.a0 if r.a0 is not None else r.gamma
        table[row][col] = r.value
    print(f"\n== {name}")
    for (exp, metric, key), cols in sorted(table.items()):
        cells = "  ".join(f"{c}:{v:.3f}" for c, v in cols.items())
        print(f"{exp:12s} {metric:14s} {key!s:>6s}  {cells}")


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg_path = Path(sys.argv[1]) if len(sys.argv) > 1 else HERE / "desk.json"
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("results")
    cfg = bench.ExperimentConfig.load(cfg_path)
    out.mkdir(parents=True, exist_ok=True)
    results, timing = bench.run_all(cfg)
    for name, records in results.items():
        bench.write_csv(records, out / f"{name}.csv")
        summarize(name, records)
    print(f"\nmean embed time {timing['embed_seconds_mean']:.3f} s over {timing['embeds']} embeddings")


if __name__ == "__main__":
    main()
