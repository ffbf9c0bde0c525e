"""Run synthesize -> build-tree -> decompose -> eval in mock mode and print a summary.

    python3 scripts/run_pipeline_demo.py --images 12 --seed 3 --out /tmp/cotforge-demo
"""
import argparse
import json
import sys
import tempfile
from pathlib import Path

from cotforge import datafiles
from cotforge.cli import run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="output directory (default: a fresh temp dir)")
    ap.add_argument("--cross-image", action="store_true")
    args = ap.parse_args(argv)

    out = Path(args.out or tempfile.mkdtemp(prefix="cotforge-demo-"))
    out.mkdir(parents=True, exist_ok=True)
    images = out / "images.tsv"
    images.write_text("".join(f"img{i:03d}\n" for i in range(args.images)), encoding="utf-8")

    steps = [
        ["synthesize", "--images", str(images), "--out-dir", str(out), "--seed", str(args.seed)],
        ["build-tree", "--qa", str(out / "qa.jsonl"), "--out", str(out / "tree.json"), "--seed", str(args.seed)]
        + (["--cross-image"] if args.cross_image else []),
        ["decompose", "--tree", str(out / "tree.json"), "--out", str(out / "cot.jsonl")],
    ]
    for argv_ in steps:
        code = run(argv_)
        if code:
            return code

    records = list(datafiles.read_jsonl(out / "cot.jsonl"))
    # a trivial baseline: always answer "yes" to each compound question
    datafiles.write_jsonl(out / "gold.jsonl", [{"id": i, "gold": r["final_answer"], "difficulty": r["depth"]}
                                               for i, r in enumerate(records)])
    datafiles.write_jsonl(out / "pred.jsonl", [{"id": i, "prediction": "yes"} for i in range(len(records))])
    if records:
        code = run(["eval", "--pred", str(out / "pred.jsonl"), "--gold", str(out / "gold.jsonl"),
                    "--out", str(out / "metrics.json")])
        if code:
            return code

    tree = json.loads((out / "tree.json").read_text())
    print(f"output dir   {out}")
    print(f"questions    {sum(1 for _ in datafiles.read_jsonl(out / 'qa.jsonl'))}")
    print(f"tree nodes   {len(tree['nodes'])} ({len(tree['roots'])} roots)")
    print(f"cot records  {len(records)}")
    if records:
        print(f"max depth    {max(r['depth'] for r in records)}")
        print(f"yes-baseline {json.loads((out / 'metrics.json').read_text())['acc']:.3f} acc")
        print("example     ", records[0]["compound_question"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
