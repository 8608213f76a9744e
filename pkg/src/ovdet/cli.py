"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import OvdetError

log = logging.getLogger("ovdet")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read_names(path) -> list[str]:
    """Names from a text file (one per line) or JSON Lines ("name" or "classes")."""
    path = Path(path)
    if path.suffix == ".jsonl":
        out = []
        for row in _read_rows(path):
            if "name" in row:
                out.append(row["name"])
            out.extend(row.get("classes", []))
        return out
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _read_rows(path) -> list[dict]:
    from .data.records import read_jsonl

    return read_jsonl(path)


def _read_captions(paths: Iterable[str]) -> Iterable[str]:
    for p in paths:
        if Path(p).suffix == ".jsonl":
            for row in _read_rows(p):
                if row.get("caption"):
                    yield row["caption"]
        else:
            yield from (line for line in Path(p).read_text(encoding="utf-8").splitlines() if line.strip())


def _concept_list(value: str) -> list[str]:
    if Path(value).is_file():
        return _read_names(value)
    return [c.strip() for c in value.split(",") if c.strip()]


# subcommands


def cmd_build_dict(args) -> int:
    from .dictionary import build_dictionary, bundled_lexicon, iter_noun_phrases, load_lexicon, save_dictionary

    lexicon = load_lexicon(args.lexicon) if args.lexicon else bundled_lexicon()
    phrases = (p for caption in _read_captions(args.captions) for p in iter_noun_phrases(caption))
    sources = [("imagetext", phrases)]
    for path in args.detection_names:
        sources.append(("detection", _read_names(path)))
    for path in args.things_names:
        sources.append(("things", _read_names(path)))
    dictionary = build_dictionary(sources, args.min_freq, lexicon)
    save_dictionary(dictionary, args.out)
    print(f"wrote {len(dictionary)} concepts to {args.out}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    from .data.synthetic import SyntheticSpec, generate_synthetic_dataset, write_synthetic_dataset

    obj = json.loads(Path(args.spec).read_text(encoding="utf-8")) if args.spec else {}
    for key in ("num_images", "eval_images", "image_size", "seed"):
        value = getattr(args, key)
        if value is not None:
            obj[key] = value
    obj.setdefault("eval_images", 100)
    spec = SyntheticSpec.from_json(obj)
    meta = write_synthetic_dataset(generate_synthetic_dataset(spec), args.out)
    print(json.dumps(meta["counts"], sort_keys=True))
    return EXIT_OK


def cmd_pseudo_label(args) -> int:
    from .data import load_records, write_jsonl
    from .dictionary import load_dictionary
    from .pseudo_label import filter_proposals, label_image, load_proposals, precompute_concept_embeddings, scorer_from_spec

    dictionary = load_dictionary(args.dict)
    records = load_records(args.records, "imagetext")[: args.max_records]
    proposals = load_proposals(args.proposals)
    scorer = scorer_from_spec(args.scorer)
    cache = precompute_concept_embeddings(dictionary, scorer, args.cache_dir) if args.use_dictionary else None
    rows = []
    for rec in records:
        props = filter_proposals(proposals.get(rec.image_id, []), args.obj_thresh, args.min_area)
        labels = label_image(rec.image, props, dictionary, scorer, args.score_thresh, args.use_dictionary,
                             rec.caption, cache)
        rows += [lab.to_json(rec.image_id) for lab in labels]
    write_jsonl(args.out, rows)
    print(f"wrote {len(rows)} pseudo labels for {len(records)} images to {args.out}")
    return EXIT_OK


_TRAIN_FLAGS = {
    "detection": str, "grounding": str, "imagetext": str, "pseudo_labels": str, "proposals": str,
    "scorer": str, "dictionary": str, "max_records": int, "N": int, "provider": str, "epochs": int,
    "batch_size": int, "lr_visual": float, "lr_text": float, "lr_scale": float, "seed": int,
    "out_dir": str, "resume": str, "min_area": float, "detection_negatives": str, "warmup_steps": int,
}
_TRAIN_TOGGLES = ("enrich", "neg_sample", "label_completion", "hflip")


def cmd_train(args) -> int:
    from .training import TrainConfig, train

    obj = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    for key in list(_TRAIN_FLAGS) + list(_TRAIN_TOGGLES):
        value = getattr(args, key)
        if value is not None:
            obj[key] = value
    if args.holdout is not None:
        obj["holdout_concepts"] = _concept_list(args.holdout)
    if args.milestones is not None:
        obj["milestones"] = [int(m) for m in args.milestones.split(",") if m]
    config = TrainConfig.from_dict(obj)
    result = train(config, progress=True)
    print(json.dumps({"checkpoint": str(result.checkpoint), "metrics": str(result.metrics), "steps": result.steps}))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .data import load_records
    from .dictionary import load_dictionary, provider_from_spec
    from .model import load_checkpoint
    from .training.evaluate import evaluate, plot_precision_recall, predict, concept_list_input

    records = load_records(args.records, "detection")
    concepts = _concept_list(args.concepts)
    dictionary = load_dictionary(args.dict) if args.dict else None
    provider = provider_from_spec(args.provider) if args.provider else None
    ckpt = load_checkpoint(args.checkpoint)
    seen = _concept_list(args.seen) if args.seen else ckpt.metadata.get("training_concepts", [])
    report = evaluate(ckpt.model, records, concepts, args.enrich, dictionary, provider, seen,
                      args.score_thresh, args.nms_iou)
    report.config["checkpoint"] = str(args.checkpoint)
    report.config["checkpoint_step"] = ckpt.metadata.get("step")
    text = report.to_json()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if args.plot:
        pin = concept_list_input(concepts, dictionary, args.enrich, provider)
        plot_precision_recall(records, predict(ckpt.model, records, pin.concepts, concepts, args.score_thresh,
                                               args.nms_iou), concepts, args.plot)
    summary = {"mean_ap": report.mean_ap, "seen_mean_ap": report.seen_mean_ap, "unseen_mean_ap": report.unseen_mean_ap,
               "random_baseline_mean_ap": report.baseline["mean_ap"] if report.baseline else None}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_enrich(args) -> int:
    from .dictionary import enrich, load_dictionary, lookup, provider_from_spec, retrieve_nearest

    dictionary = load_dictionary(args.dict)
    provider = provider_from_spec(args.provider) if args.provider else None
    for name in args.name:
        out = {"name": name, "enriched": enrich(dictionary, name, provider)}
        if provider is not None and lookup(dictionary, name) is None and len(dictionary):
            hit = retrieve_nearest(dictionary, name, provider)
            out["retrieved"] = hit.matched_name
            out["similarity"] = hit.similarity
        print(json.dumps(out) if args.json else out["enriched"])
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(dictionary=args.dict, provider=args.provider, scorer=args.scorer, checkpoint=args.checkpoint)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ovdet", description="Open-vocabulary detection pre-training at desk scale.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("build-dict", help="build a concept dictionary")
    p.add_argument("--captions", nargs="*", default=[], metavar="FILE", help="caption files (.jsonl or text)")
    p.add_argument("--detection-names", nargs="*", default=[], metavar="FILE")
    p.add_argument("--things-names", nargs="*", default=[], metavar="FILE")
    p.add_argument("--lexicon", metavar="FILE", help="JSON Lines {name, definition}; default: bundled mini-lexicon")
    p.add_argument("--min-freq", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("gen-data", help="write a synthetic shapes dataset")
    p.add_argument("--spec", metavar="FILE", help="JSON generator spec")
    p.add_argument("--out", required=True)
    p.add_argument("--num-images", type=int)
    p.add_argument("--eval-images", type=int)
    p.add_argument("--image-size", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pseudo-label", help="pseudo-label image-text records")
    p.add_argument("--records", required=True)
    p.add_argument("--proposals", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--scorer", default="stub", help="stub | file:PATH | http:URL | model:CHECKPOINT")
    p.add_argument("--obj-thresh", type=float, default=0.3)
    p.add_argument("--min-area", type=float, default=6000.0)
    p.add_argument("--score-thresh", type=float, default=0.24)
    p.add_argument("--use-dictionary", action=argparse.BooleanOptionalAction, default=True,
                   help="score against the whole dictionary (label completion)")
    p.add_argument("--max-records", type=int)
    p.add_argument("--cache-dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("train", help="train a detector")
    p.add_argument("--config", metavar="FILE", help="JSON config with flat keys; flags override it")
    for key, typ in _TRAIN_FLAGS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ)
    for key in _TRAIN_TOGGLES:
        p.add_argument("--" + key.replace("_", "-"), dest=key, action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--holdout", help="comma list or file of concepts never used as negatives")
    p.add_argument("--milestones", help="comma-separated epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--records", required=True, help="detection-format JSON Lines")
    p.add_argument("--concepts", required=True, help="comma list or file of concept names")
    p.add_argument("--dict")
    p.add_argument("--provider", help="embedding provider for retrieval: stub | file:PATH | http:URL")
    p.add_argument("--enrich", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seen", help="comma list or file; default: training concepts stored in the checkpoint")
    p.add_argument("--score-thresh", type=float, default=0.05)
    p.add_argument("--nms-iou", type=float, default=0.5)
    p.add_argument("--out", help="EvalReport JSON path")
    p.add_argument("--plot", metavar="PNG", help="precision-recall figure")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("enrich", help="print enriched concept text")
    p.add_argument("--dict", required=True)
    p.add_argument("--name", required=True, action="append")
    p.add_argument("--provider", help="stub | file:PATH | http:URL")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--dict")
    p.add_argument("--provider", default="stub")
    p.add_argument("--scorer", default="stub")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OvdetError, ValueError, OSError, KeyError) as exc:
        print(f"ovdet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
