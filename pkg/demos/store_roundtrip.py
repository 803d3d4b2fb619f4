"""Build a synthetic embedding store, write it to disk, read it back,
and poke at the contents. Quick sanity tour of the binary format."""
import argparse
import tempfile
from pathlib import Path

import numpy as np

from callerspace import SynthSpec, generate_store
from callerspace.store import read_store, split_dataset, store_summary, write_store


def main(args):
    spec = SynthSpec(
        num_callers=args.callers,
        embed_dim=args.dim,
        segments_per_caller=args.segments,
        imbalance_ratio=3.0,
        separation=4.0,
        seed=args.seed,
    )
    store = generate_store(spec)
    path = Path(args.out or tempfile.gettempdir()) / "demo.store"
    write_store(store.meta, store.records, path)
    print(f"wrote {path} ({path.stat().st_size} bytes)")

    back = read_store(path)
    back.validate()
    print(f"model={back.meta.model_name} dim={back.meta.embed_dim} "
          f"segments={len(back.records)}")

    # frames are the unit everything downstream consumes
    r = back.records[0]
    frames = np.asarray(r.frames)
    print(f"first segment: caller {r.caller_id}, {r.start_ms}-{r.end_ms} ms, "
          f"frames {frames.shape}, mean norm {np.linalg.norm(frames, axis=1).mean():.3f}")

    summary = store_summary(back)
    for cid, st in sorted(summary["per_caller"].items(), key=lambda kv: int(kv[0])):
        print(f"  caller {cid}: {st['count']} segments, "
              f"median {st['median_ms']:.0f} ms")

    assignment = split_dataset(back, ratios=(0.7, 0.2, 0.1), seed=args.seed)
    print("split counts:", assignment.counts())


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--callers", type=int, default=6)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--segments", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    main(ap.parse_args())
