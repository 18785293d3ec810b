"""Command-line surface: train, eval, predict, synth, gradcheck.

Exit codes: 0 success, 1 check failure, 2 usage/validation, 3 numeric failure.
Every run writes a manifest (config echo, seed, corpus digests, artifacts,
wall clock) so it can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, command, config, seed, corpora, artifacts, started):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "corpus_digests": {str(p): _sha256(p) for p in corpora},
        "artifacts": [str(a) for a in artifacts],
        "wall_clock_sec": round(time.time() - started, 3),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def _load_training_config(args):
    from .training import TrainingConfig

    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            data = json.load(f)
    for key in ("variant", "epochs", "lr", "seed", "batch_size"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    return TrainingConfig.from_dict(data)


def cmd_train(args):
    started = time.time()
    from .data import load_corpus
    from .training import TrainingDiverged, save_model, train, write_history

    try:
        config = _load_training_config(args)
        train_corpus = load_corpus(args.train)
        dev_corpus = load_corpus(args.dev) if args.dev else None
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    os.makedirs(args.out, exist_ok=True)
    try:
        model, history = train(train_corpus, dev_corpus, config)
    except TrainingDiverged as exc:
        dump = os.path.join(args.out, "divergence.json")
        with open(dump, "w", encoding="utf-8") as f:
            json.dump(exc.diagnostics, f, indent=2)
        print(f"error: {exc} (diagnostics in {dump})", file=sys.stderr)
        return EXIT_NUMERIC

    ckpt = os.path.join(args.out, "checkpoint.npz")
    hist = os.path.join(args.out, "history.csv")
    save_model(model, config, ckpt)
    write_history(history, hist)
    from dataclasses import asdict
    _write_manifest(
        os.path.join(args.out, "manifest.json"), "train", asdict(config),
        config.seed, [args.train] + ([args.dev] if args.dev else []),
        [ckpt, hist], started,
    )
    last = history[-1]
    print(f"trained {config.variant}: final train loss {last.train_loss:.4f}, "
          f"dev F1 {last.dev_f1:.4f}")
    return EXIT_OK


def cmd_eval(args):
    started = time.time()
    from .data import load_corpus
    from .evaluation import (constraint_violation_rate, format_report,
                             load_constraints, oracle_role_eval,
                             predict_corpus, score, sliced_eval)
    from .training import load_model

    try:
        model, config = load_model(args.checkpoint)
        corpus = load_corpus(args.corpus)
        constraints = load_constraints(args.constraints) if args.constraints else None
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    predictions = predict_corpus(model, corpus)
    result = {"overall": score(predictions, corpus).as_dict()}
    lines = [format_report(score(predictions, corpus))]

    if args.buckets or args.overlap:
        sliced = sliced_eval(model, corpus, predictions)
        if args.buckets:
            from .data import ENTITY_COUNT_BUCKETS
            result["buckets"] = []
            for (lo, hi), rep in zip(ENTITY_COUNT_BUCKETS, sliced["buckets"]):
                label = f"[{lo},{hi if hi is not None else ''}]"
                result["buckets"].append({"range": label, **rep.as_dict()})
                lines.append(format_report(rep, label))
        if args.overlap:
            result["subset_O"] = sliced["overlap"].as_dict()
            result["subset_N"] = sliced["no_overlap"].as_dict()
            lines.append(format_report(sliced["overlap"], "subset_O"))
            lines.append(format_report(sliced["no_overlap"], "subset_N"))
    if constraints is not None:
        rate = constraint_violation_rate(predictions, constraints, corpus)
        result["constraint_violation_rate"] = rate
        lines.append(f"constraint violation rate: {rate:.4f}")
    if args.oracle_roles:
        pred_rep, gold_rep = oracle_role_eval(model, corpus)
        result["oracle_roles"] = {
            "predicted_context": pred_rep.as_dict(),
            "gold_context": gold_rep.as_dict(),
        }
        lines.append(format_report(pred_rep, "pred-ctx"))
        lines.append(format_report(gold_rep, "gold-ctx"))

    print("\n".join(lines))
    artifacts = []
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        report_path = os.path.join(args.out, "report.json")
        with open(report_path, "w", encoding="utf-8") as f:
            json.dump(result, f, indent=2, sort_keys=True)
        table_path = os.path.join(args.out, "report.txt")
        with open(table_path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        artifacts = [report_path, table_path]
        _write_manifest(
            os.path.join(args.out, "manifest.json"), "eval",
            {"checkpoint": args.checkpoint}, config.seed,
            [args.corpus], artifacts, started,
        )
    return EXIT_OK


def cmd_predict(args):
    started = time.time()
    from .data import load_corpus
    from .evaluation import write_predictions
    from .training import load_model

    try:
        model, config = load_model(args.checkpoint)
        corpus = load_corpus(args.corpus)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_predictions(model, corpus, args.out)
    _write_manifest(args.out + ".manifest.json", "predict",
                    {"checkpoint": args.checkpoint}, config.seed,
                    [args.corpus], [args.out], started)
    return EXIT_OK


def cmd_synth(args):
    started = time.time()
    from dataclasses import asdict
    from .data import save_corpus
    from .synthetic import (GenerationError, GeneratorProfile, generate_synthetic,
                            get_profile)

    try:
        if os.path.exists(args.profile):
            with open(args.profile, encoding="utf-8") as f:
                raw = json.load(f)
            for key in ("entity_count", "event_types", "roles", "unique_roles"):
                if key in raw:
                    raw[key] = tuple(raw[key])
            profile = GeneratorProfile(**raw)
        else:
            overrides = {}
            if args.num_sentences is not None:
                overrides["num_sentences"] = args.num_sentences
            profile = get_profile(args.profile, **overrides)
        corpus = generate_synthetic(profile, args.seed)
    except (GenerationError, TypeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    save_corpus(corpus, args.out)
    _write_manifest(args.out + ".manifest.json", "synth", asdict(profile),
                    args.seed, [], [args.out], started)
    print(f"wrote {corpus.num_events()} events to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args):
    from .checks import TOLERANCE, run_all

    results, ok = run_all(num_instances=args.instances, seed=args.seed)
    for name, err in results.items():
        status = "ok" if err < TOLERANCE else "FAIL"
        print(f"{name:>18}  max rel err {err:.3e}  [{status}]")
    if not ok:
        print(f"gradient check failed (tolerance {TOLERANCE:g})", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="berd")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("BERD_THREADS", "0")),
                   help="cap BLAS worker threads (0 = library default)")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", help="JSON training config")
    t.add_argument("--train", required=True)
    t.add_argument("--dev")
    t.add_argument("--out", required=True)
    t.add_argument("--variant")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a corpus")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--out")
    e.add_argument("--buckets", action="store_true")
    e.add_argument("--overlap", action="store_true")
    e.add_argument("--constraints")
    e.add_argument("--oracle-roles", dest="oracle_roles", action="store_true")
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("predict", help="write prediction JSONL")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--corpus", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_predict)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--profile", required=True,
                   help="profile name or JSON profile file")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--num-sentences", dest="num_sentences", type=int)
    s.set_defaults(fn=cmd_synth)

    g = sub.add_parser("gradcheck", help="run the gradient verification suites")
    g.add_argument("--instances", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.threads:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
