"""``cotforge`` command line: synthesize, build-tree, decompose, score, train-toy, eval.

Each stage reads the previous stage's files. Exit codes: 0 success,
1 validation error (bad flags, bad config, bad data), 2 provider or I/O
failure. Every successful command records a run manifest (resolved
config, seeds, input/output digests, duration) under its command name in
``manifest.json`` next to its primary output.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from cotforge import bench, datafiles
from cotforge.config import AppConfig, ccvr_to_dict, load_ccvr_config, load_config
from cotforge.errors import ProviderError, ValidationError
from cotforge.grpo import GRPOConfig, MicroTask, train_toy
from cotforge.reward import ccvr_reward
from cotforge.synthesis import MockWords, SubstitutionLexicon, synthesize_image
from cotforge.treebuild import QuestionTree, build_forest, decompose


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _update_manifest(out_dir: Path, command: str, entry: dict) -> Path:
    path = out_dir / "manifest.json"
    doc = {}
    if path.exists():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            doc = {}
    doc[command] = entry
    datafiles.write_json(path, dict(sorted(doc.items())))
    return path


def _finish(args, result: dict, started: float) -> None:
    outputs = result["outputs"]
    entry = {
        "command": args.command,
        "config": result["config"],
        "seeds": result["seeds"],
        "inputs": {str(p): datafiles.file_digest(p) for p in result["inputs"]},
        "outputs": {str(p): datafiles.file_digest(p) for p in outputs},
        "duration_s": round(time.perf_counter() - started, 6),
    }
    out_dir = Path(args.manifest_dir) if args.manifest_dir else Path(outputs[0]).parent
    _update_manifest(out_dir, args.command, entry)


# -- subcommands -----------------------------------------------------------

def cmd_synthesize(args, cfg: AppConfig) -> dict:
    provider = cfg.provider
    if args.mode:
        provider = dataclasses.replace(provider, mode=args.mode)
    if args.seed is not None:
        provider = dataclasses.replace(provider, seed=args.seed)
    neg = cfg.neg_per_pos if args.neg_per_pos is None else args.neg_per_pos
    if neg < 0:
        raise ValidationError("--neg-per-pos must be >= 0")
    words = MockWords()
    if args.lexicon:
        lexicon = SubstitutionLexicon(json.loads(Path(args.lexicon).read_text(encoding="utf-8")))
    else:
        lexicon = words.lexicon()

    images = datafiles.read_image_list(args.images)
    triples_rows, qa_rows = [], []
    skipped = 0
    for image in images:
        res = synthesize_image(image, provider, lexicon, neg, words)
        if res.skipped:
            skipped += 1
            print(f"skip {image.id}: {res.skipped}", file=sys.stderr)
            continue
        base = len(triples_rows)
        triples_rows.extend(datafiles.triple_row(image.id, t) for t in res.triples)
        for qa in res.qa:
            qa_rows.append(datafiles.qa_row(image.id, qa, base + res.triples.index(qa.source_triple)))

    out = Path(args.out_dir)
    datafiles.write_jsonl(out / "triples.jsonl", triples_rows)
    datafiles.write_jsonl(out / "qa.jsonl", qa_rows)
    print(f"{len(images)} images, {skipped} skipped, {len(triples_rows)} triples, {len(qa_rows)} questions",
          file=sys.stderr)
    inputs = [args.images] + ([args.lexicon] if args.lexicon else [])
    prov_doc = {**cfg.to_dict()["provider"], "mode": provider.mode, "seed": provider.seed}
    return {"inputs": inputs, "outputs": [out / "triples.jsonl", out / "qa.jsonl"],
            "config": {"provider": prov_doc, "neg_per_pos": neg, "lexicon": lexicon.to_dict()},
            "seeds": {"provider": provider.seed}}


def cmd_build_tree(args, cfg: AppConfig) -> dict:
    triples_path = Path(args.triples) if args.triples else Path(args.qa).with_name("triples.jsonl")
    triples = [datafiles.triple_from_row(r)[1] for r in datafiles.read_jsonl(triples_path)]
    groups: dict[str, list] = {}
    for row in datafiles.read_jsonl(args.qa):
        image_id, qa = datafiles.qa_from_row(row, triples)
        groups.setdefault("*" if args.cross_image else image_id, []).append(qa)
    merge_range = cfg.merge_range
    if args.merge_min is not None or args.merge_max is not None:
        merge_range = (args.merge_min or merge_range[0], args.merge_max or merge_range[1])
    seed = cfg.provider.seed if args.seed is None else args.seed
    tree = build_forest(list(groups.values()), merge_range, seed, cfg.embedder, cfg.provider, cfg.ccvr.epsilon)
    datafiles.atomic_write_bytes(args.out, tree.dumps().encode("utf-8"))
    return {"inputs": [args.qa, triples_path], "outputs": [Path(args.out)],
            "config": {"merge_range": list(merge_range), "cross_image": args.cross_image,
                       "embedder": dataclasses.asdict(cfg.embedder), "epsilon": cfg.ccvr.epsilon},
            "seeds": {"tree": seed}}


def cmd_decompose(args, cfg: AppConfig) -> dict:
    tree = QuestionTree.from_dict(json.loads(Path(args.tree).read_text(encoding="utf-8")))
    records = decompose(tree)
    datafiles.write_jsonl(args.out, (r.to_dict() for r in records))
    return {"inputs": [args.tree], "outputs": [Path(args.out)],
            "config": {}, "seeds": {"tree": tree.seed}}


def cmd_score(args, cfg: AppConfig) -> dict:
    ccvr = load_ccvr_config(args.reward_config) if args.reward_config else cfg.ccvr
    refs = {str(r["id"]): r for r in datafiles.read_jsonl(args.refs)}
    rows = []
    for resp in datafiles.read_jsonl(args.responses):
        rid = str(resp["id"])
        if rid not in refs:
            raise ValidationError(f"no reference for response id {rid}")
        ref = refs[rid]
        br = ccvr_reward(resp["raw_response"], ref["ground_truth"], ref["ref_chain"], ccvr)
        rows.append({"id": resp["id"], **br.to_dict()})
    datafiles.write_jsonl(args.out, rows)
    inputs = [args.responses, args.refs] + ([args.reward_config] if args.reward_config else [])
    return {"inputs": inputs, "outputs": [Path(args.out)],
            "config": {"ccvr": ccvr_to_dict(ccvr)}, "seeds": {}}


def cmd_train_toy(args, cfg: AppConfig) -> dict:
    overrides = {k: v for k, v in {
        "mode": args.mode, "K": args.K, "beta": args.beta, "learning_rate": args.lr,
        "steps": args.steps, "seed": args.seed, "length_normalize": args.length_normalize or None,
    }.items() if v is not None}
    gcfg = GRPOConfig(**{**dataclasses.asdict(cfg.grpo), **overrides})
    task = MicroTask()
    report = train_toy(task, gcfg, cfg.ccvr)
    report_path = Path(args.report)
    policy_path = report_path.with_name(report_path.stem + ".policy.json")
    doc = {
        "config": dataclasses.asdict(gcfg),
        "task": {"prompt_id": task.prompt_id, "ground_truth": task.ground_truth,
                 "ref_chain": task.ref_chain, "vocab": list(task.vocab)},
        "steps": report.to_dict()["steps"],
        "final_policy": policy_path.name,
    }
    datafiles.write_json(policy_path, {"vocab": list(report.policy.vocab), "max_len": report.policy.max_len,
                                       "logits": {str(p): z.tolist() for p, z in report.policy.logits.items()}})
    datafiles.write_json(report_path, doc)
    if report.steps:
        last = report.steps[-1]
        print(f"step {last.step}: mean reward {last.mean_reward:.3f}", file=sys.stderr)
    return {"inputs": [], "outputs": [report_path, policy_path],
            "config": {"grpo": dataclasses.asdict(gcfg), "ccvr": ccvr_to_dict(cfg.ccvr)}, "seeds": {"grpo": gcfg.seed}}


def cmd_eval(args, cfg: AppConfig) -> dict:
    preds = {}
    for row in datafiles.read_jsonl(args.pred):
        preds[str(row["id"])] = row["prediction"]
    items = [datafiles.eval_item_from_row(r) for r in datafiles.read_jsonl(args.gold)]
    metrics = bench.evaluate(preds, items, macro=args.macro)
    datafiles.write_json(args.out, metrics.to_dict())
    print(f"acc={metrics.acc:.4f} f1={metrics.f1:.4f}", file=sys.stderr)
    return {"inputs": [args.pred, args.gold], "outputs": [Path(args.out)],
            "config": {"macro": args.macro}, "seeds": {}}


COMMANDS = {
    "synthesize": cmd_synthesize,
    "build-tree": cmd_build_tree,
    "decompose": cmd_decompose,
    "score": cmd_score,
    "train-toy": cmd_train_toy,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config document")
    common.add_argument("--manifest-dir", help="directory for manifest.json (default: next to the output)")

    p = _Parser(prog="cotforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synthesize", parents=[common], help="images -> triples.jsonl, qa.jsonl")
    s.add_argument("--images", required=True, help="image list, one 'id<TAB>uri' per line")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--mode", choices=["mock", "remote"])
    s.add_argument("--seed", type=int)
    s.add_argument("--neg-per-pos", type=int)
    s.add_argument("--lexicon", help="JSON object token -> [replacements]")

    s = sub.add_parser("build-tree", parents=[common], help="qa.jsonl -> tree.json")
    s.add_argument("--qa", required=True)
    s.add_argument("--triples", help="triples.jsonl (default: next to --qa)")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--merge-min", type=int)
    s.add_argument("--merge-max", type=int)
    s.add_argument("--cross-image", action="store_true", help="experimental: one tree over all images")

    s = sub.add_parser("decompose", parents=[common], help="tree.json -> cot.jsonl")
    s.add_argument("--tree", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("score", parents=[common], help="responses + refs -> rewards.jsonl")
    s.add_argument("--responses", required=True)
    s.add_argument("--refs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--reward-config", help="flat reward config document")

    s = sub.add_parser("train-toy", parents=[common], help="train the toy policy on the micro task")
    s.add_argument("--mode", choices=["alg1", "eq5"])
    s.add_argument("--K", type=int)
    s.add_argument("--beta", type=float)
    s.add_argument("--lr", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--length-normalize", action="store_true")
    s.add_argument("--report", required=True)

    s = sub.add_parser("eval", parents=[common], help="predictions + gold -> metrics.json")
    s.add_argument("--pred", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--macro", action="store_true", help="also report macro-averaged F1")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    started = time.perf_counter()
    try:
        cfg = load_config(args.config)
        result = COMMANDS[args.command](args, cfg)
        _finish(args, result, started)
    except ValidationError as exc:
        print(f"cotforge {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ProviderError, OSError) as exc:
        print(f"cotforge {args.command}: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError) as exc:
        print(f"cotforge {args.command}: malformed input: {exc!r}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
