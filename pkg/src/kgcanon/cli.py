"""Command-line entry point.

Subcommands: ingest, sideinfo, init, train, cluster, eval, gen-synth,
build-gold, split. Every run with an --out-dir writes a manifest.json
recording the config snapshot, input digests, seed, versions, and
per-stage wall times. All randomness is controlled by --seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import TrainConfig, load_config, write_config
from .data_builder import (SynthConfig, build_gold, gen_synthetic,
                           load_scored_pairs, split_triples)
from .errors import KgcanonError
from .kg import load_clusters, load_triples, write_clusters
from .metrics import MetricReport, evaluate
from .phrases import load_word_vectors, write_word_vectors
from .side_info import (dedupe_pairs, idf_overlap_pairs,
                        load_imported_clusters, load_pairs, morph_pairs,
                        score_imported_clusters, write_pairs)
from .trainer import (infer_clusters, load_model, run_pipeline_ablation,
                      save_model, train_full)


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class _Manifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.data = {
            "command": command,
            "versions": {"kgcanon": __version__, "numpy": np.__version__,
                         "python": sys.version.split()[0]},
            "inputs": {}, "outputs": [], "wall_times": {},
        }
        self.data["seed"] = getattr(args, "seed", None)
        self._t0 = time.monotonic()
        self._stage_start = self._t0

    def add_input(self, path) -> None:
        if path:
            self.data["inputs"][str(path)] = _digest(path)

    def add_output(self, path) -> None:
        self.data["outputs"].append(str(path))

    def stage(self, name: str) -> None:
        now = time.monotonic()
        self.data["wall_times"][name] = round(now - self._stage_start, 3)
        self._stage_start = now

    def write(self, out_dir) -> None:
        self.data["wall_times"]["total"] = round(time.monotonic() - self._t0, 3)
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands

def _cmd_ingest(args) -> int:
    kg = load_triples(args.triples)
    print(f"triples={len(kg)}")
    print(f"entity_mentions={len(kg.entity_vocab)}")
    print(f"relation_mentions={len(kg.relation_vocab)}")
    print(f"head_mentions={kg.head_mentions().size}")
    return 0


def _cmd_sideinfo(args) -> int:
    kg = load_triples(args.triples)
    vocab = kg.entity_vocab if args.namespace == "entity" else kg.relation_vocab
    pairs = []
    if args.idf_threshold is not None:
        pairs += idf_overlap_pairs(vocab, args.idf_threshold)
    if args.morph:
        pairs += morph_pairs(vocab)
    for path in args.imports or []:
        clusters, source = load_imported_clusters(path, vocab)
        pairs += score_imported_clusters(clusters, source)
    pairs = dedupe_pairs(pairs)
    write_pairs(pairs, vocab, args.out)
    print(f"pairs={len(pairs)}")
    return 0


def _load_train_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for field in ("theta_e", "theta_r", "d_in", "d_z", "t_e", "t_d", "seed",
                  "embed_mode", "init", "kmeans_k_e", "kmeans_k_r", "tau",
                  "num_negatives", "batch_size_train", "batch_size_eval"):
        value = getattr(args, field, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "kge_loss", None) is not None:
        overrides["kge"] = args.kge_loss
    for name in getattr(args, "ablation", None) or []:
        overrides[name.replace("-", "_")] = True
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _cmd_init(args) -> int:
    from .trainer import initialize

    manifest = _Manifest("init", args)
    out = _out_dir(args)
    kg = load_triples(args.triples)
    wv = load_word_vectors(args.wordvecs)
    manifest.add_input(args.triples)
    manifest.add_input(args.wordvecs)
    cfg = _load_train_config(args)
    cfg = dataclasses.replace(cfg, d_z=wv.dim, t_e=0, t_d=0)
    _, clus_e, clus_r = initialize(kg, wv, cfg)
    manifest.stage("initialize")
    for name, clustering, vocab in (("init_entities.tsv", clus_e, kg.entity_vocab),
                                    ("init_relations.tsv", clus_r, kg.relation_vocab)):
        path = out / name
        write_clusters(clustering, vocab, path)
        manifest.add_output(path)
    print(f"entity_clusters={clus_e.num_clusters}")
    print(f"relation_clusters={clus_r.num_clusters}")
    manifest.write(out)
    return 0


def _cmd_train(args) -> int:
    manifest = _Manifest("train", args)
    out = _out_dir(args)
    cfg = _load_train_config(args)
    kg = load_triples(args.triples)
    wv = load_word_vectors(args.wordvecs)
    si_e = load_pairs(args.sideinfo, kg.entity_vocab) if args.sideinfo else []
    si_r = load_pairs(args.sideinfo_rel, kg.relation_vocab) \
        if args.sideinfo_rel else []
    for path in (args.triples, args.wordvecs, args.sideinfo, args.sideinfo_rel,
                 args.config):
        if path:
            manifest.add_input(path)
    manifest.data["config"] = cfg.to_dict()
    manifest.stage("load")

    log = print if args.verbose else None
    model, _, _ = train_full(kg, wv, si_e, si_r, cfg, log=log)
    manifest.stage("train")

    ckpt = Path(args.out) if args.out else out / "model.ckpt"
    save_model(model, ckpt, {"triples_digest": _digest(args.triples)})
    manifest.add_output(ckpt)

    if cfg.pipeline_vae_hac:
        clus_e, clus_r = run_pipeline_ablation(model, kg)
    else:
        clus_e, clus_r = infer_clusters(model, kg)
    for name, clustering, vocab in (("entities.tsv", clus_e, kg.entity_vocab),
                                    ("relations.tsv", clus_r, kg.relation_vocab)):
        path = out / name
        write_clusters(clustering, vocab, path)
        manifest.add_output(path)
    manifest.stage("cluster")
    print(f"entity_clusters={clus_e.num_clusters}")
    print(f"relation_clusters={clus_r.num_clusters}")
    manifest.write(out)
    return 0


def _cmd_cluster(args) -> int:
    manifest = _Manifest("cluster", args)
    out = _out_dir(args)
    model = load_model(args.checkpoint)
    kg = load_triples(args.triples)
    manifest.add_input(args.checkpoint)
    manifest.add_input(args.triples)
    if args.pipeline:
        clus_e, clus_r = run_pipeline_ablation(model, kg)
    else:
        clus_e, clus_r = infer_clusters(model, kg)
    for name, clustering, vocab in (("entities.tsv", clus_e, kg.entity_vocab),
                                    ("relations.tsv", clus_r, kg.relation_vocab)):
        path = out / name
        write_clusters(clustering, vocab, path)
        manifest.add_output(path)
    manifest.stage("cluster")
    print(f"entity_clusters={clus_e.num_clusters}")
    print(f"relation_clusters={clus_r.num_clusters}")
    manifest.write(out)
    return 0


def _vocab_from_cluster_files(paths) -> "Vocabulary":
    from .kg import Vocabulary

    forms: list[str] = []
    seen: set[str] = set()
    for path in paths:
        with open(path, encoding="utf-8") as f:
            for raw in f:
                line = raw.rstrip("\n")
                if not line:
                    continue
                for surface in line.split("\t"):
                    if surface not in seen:
                        seen.add(surface)
                        forms.append(surface)
    return Vocabulary(forms)


def _print_report(report: MetricReport, machine: bool, out_path=None) -> None:
    header = ("metric", "precision", "recall", "f1")
    rows = [
        ("macro", report.macro_p, report.macro_r, report.macro_f1),
        ("micro", report.micro_p, report.micro_r, report.micro_f1),
        ("pair", report.pair_p, report.pair_r, report.pair_f1),
    ]
    print(f"{header[0]:<8}{header[1]:>12}{header[2]:>12}{header[3]:>12}")
    for name, p, r, f1 in rows:
        print(f"{name:<8}{p:>12.4f}{r:>12.4f}{f1:>12.4f}")
    print(f"{'mean_f1':<8}{'':>12}{'':>12}{report.mean_f1:>12.4f}")
    lines = [f"{k}={v:.6f}" for k, v in report.as_dict().items()]
    if machine:
        for line in lines:
            print(line)
    if out_path:
        Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_eval(args) -> int:
    if args.triples:
        kg = load_triples(args.triples)
        vocab = kg.entity_vocab
    else:
        if args.universe == "head":
            raise KgcanonError("--universe head requires --triples")
        kg = None
        vocab = _vocab_from_cluster_files([args.pred, args.gold])
    pred = load_clusters(args.pred, vocab, "entity")
    gold = load_clusters(args.gold, vocab, "entity")
    universe = kg.head_mentions() if (kg and args.universe == "head") else None
    report = evaluate(pred, gold, universe)
    _print_report(report, args.machine, args.out)
    return 0


def _cmd_gen_synth(args) -> int:
    manifest = _Manifest("gen-synth", args)
    out = _out_dir(args)
    cfg = SynthConfig(num_entities=args.entities,
                      surface_forms_per_entity=args.forms_per_entity,
                      num_relations=args.relations,
                      paraphrases_per_relation=args.paraphrases,
                      num_triples=args.num_triples,
                      token_noise_prob=args.noise,
                      seed=args.seed, vec_dim=args.vec_dim)
    ds = gen_synthetic(cfg)

    triples_path = out / "triples.tsv"
    with open(triples_path, "w", encoding="utf-8") as f:
        for t in ds.kg.triples:
            f.write(f"{ds.kg.entity_vocab.surface(t.head)}\t"
                    f"{ds.kg.relation_vocab.surface(t.rel)}\t"
                    f"{ds.kg.entity_vocab.surface(t.tail)}\n")
    write_clusters(ds.gold_entities, ds.kg.entity_vocab,
                   out / "gold_entities.tsv", include_singletons=False)
    write_clusters(ds.gold_relations, ds.kg.relation_vocab,
                   out / "gold_relations.tsv", include_singletons=False)
    write_pairs(ds.oracle_entity_pairs, ds.kg.entity_vocab,
                out / "sideinfo_entities.tsv")
    write_pairs(ds.oracle_relation_pairs, ds.kg.relation_vocab,
                out / "sideinfo_relations.tsv")
    write_word_vectors(ds.word_vectors, out / "wordvecs.txt")
    write_config(dataclasses.replace(TrainConfig(), d_z=cfg.vec_dim,
                                     seed=args.seed,
                                     embed_mode="unnormalized"),
                 out / "train_config.ini")
    for name in ("triples.tsv", "gold_entities.tsv", "gold_relations.tsv",
                 "sideinfo_entities.tsv", "sideinfo_relations.tsv",
                 "wordvecs.txt", "train_config.ini"):
        manifest.add_output(out / name)
    manifest.stage("generate")
    print(f"triples={len(ds.kg)}")
    print(f"entity_mentions={len(ds.kg.entity_vocab)}")
    print(f"relation_mentions={len(ds.kg.relation_vocab)}")
    manifest.write(out)
    return 0


def _cmd_build_gold(args) -> int:
    manifest = _Manifest("build-gold", args)
    out = _out_dir(args)
    pairs = load_scored_pairs(args.pairs)
    manifest.add_input(args.pairs)
    kg = load_triples(args.triples) if args.triples else None
    if args.triples:
        manifest.add_input(args.triples)
    components, filtered = build_gold(pairs, args.threshold, kg)
    gold_path = out / "gold_clusters.tsv"
    with open(gold_path, "w", encoding="utf-8") as f:
        for comp in components:
            f.write("\t".join(comp) + "\n")
    manifest.add_output(gold_path)
    print(f"gold_clusters={len(components)}")
    if filtered is not None:
        fkg, _ = filtered
        triples_path = out / "filtered_triples.tsv"
        with open(triples_path, "w", encoding="utf-8") as f:
            for t in fkg.triples:
                f.write(f"{fkg.entity_vocab.surface(t.head)}\t"
                        f"{fkg.relation_vocab.surface(t.rel)}\t"
                        f"{fkg.entity_vocab.surface(t.tail)}\n")
        manifest.add_output(triples_path)
        print(f"filtered_triples={len(fkg)}")
    manifest.stage("build")
    manifest.write(out)
    return 0


def _cmd_split(args) -> int:
    out = _out_dir(args)
    kg = load_triples(args.triples)
    part_a, part_b = split_triples(kg, args.ratio, args.seed)
    for name, part in (("split_a.tsv", part_a), ("split_b.tsv", part_b)):
        with open(out / name, "w", encoding="utf-8") as f:
            for h, r, t in part:
                f.write(f"{h}\t{r}\t{t}\n")
    print(f"split_a={len(part_a)}")
    print(f"split_b={len(part_b)}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgcanon",
        description="Canonicalize noun and relation phrases in an open "
                    "knowledge graph by jointly learning mention embeddings "
                    "and Gaussian-mixture cluster assignments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a triples file and print stats")
    p.add_argument("--triples", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("sideinfo", help="generate weighted equivalence pairs")
    p.add_argument("--triples", required=True)
    p.add_argument("--namespace", choices=("entity", "relation"),
                   default="entity")
    p.add_argument("--idf-threshold", type=float, default=None,
                   help="emit token-overlap pairs at or above this score "
                        "(reference values: 0.4 entities, 0.9 relations)")
    p.add_argument("--morph", action="store_true",
                   help="emit morphological-normalization pairs (score 1)")
    p.add_argument("--import", dest="imports", action="append", default=[],
                   metavar="CLUSTERS_FILE",
                   help="score an externally produced cluster file "
                        "(repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sideinfo)

    def add_train_flags(p, with_schedule=True):
        p.add_argument("--theta-e", dest="theta_e", type=float, default=None,
                       help="entity agglomeration threshold (default 0.4)")
        p.add_argument("--theta-r", dest="theta_r", type=float, default=None,
                       help="relation agglomeration threshold (default 0.37)")
        p.add_argument("--init", choices=("hac", "kmeans"), default=None,
                       help="flat clustering used to initialize the mixtures")
        p.add_argument("--kmeans-k-e", dest="kmeans_k_e", type=int, default=None)
        p.add_argument("--kmeans-k-r", dest="kmeans_k_r", type=int, default=None)
        p.add_argument("--embed-mode", dest="embed_mode", default=None,
                       choices=("normalized", "unnormalized"),
                       help="token-vector averaging strategy")
        p.add_argument("--seed", type=int, default=None,
                       help="controls all randomness (default 55)")
        if with_schedule:
            p.add_argument("--d-in", dest="d_in", type=int, default=None,
                           help="mention embedding width (default 768)")
            p.add_argument("--d-z", dest="d_z", type=int, default=None,
                           help="latent dimension; must equal the word-vector "
                                "dimension (default 100)")
            p.add_argument("--t-e", dest="t_e", type=int, default=None,
                           help="encoder epochs (default 50)")
            p.add_argument("--t-d", dest="t_d", type=int, default=None,
                           help="decoder epochs (default 300)")
            p.add_argument("--tau", type=float, default=None,
                           help="soft-argmax temperature (default 1e5)")
            p.add_argument("--num-negatives", dest="num_negatives", type=int,
                           default=None,
                           help="negative samples per positive (default 20)")
            p.add_argument("--batch-size-train", dest="batch_size_train",
                           type=int, default=None, help="default 50")
            p.add_argument("--batch-size-eval", dest="batch_size_eval",
                           type=int, default=None, help="default 5")
            p.add_argument("--kge-loss", dest="kge_loss", default=None,
                           choices=("bce", "margin", "transe"),
                           help="triple-scoring objective (default bce)")
            p.add_argument("--ablation", action="append", default=[],
                           choices=("no-kge", "no-hidden-layer",
                                    "pipeline-vae-hac", "freeze-lookup-step1"),
                           help="structural ablations (repeatable)")

    p = sub.add_parser("init", help="run only the mixture initialization")
    p.add_argument("--triples", required=True)
    p.add_argument("--wordvecs", required=True)
    p.add_argument("--out-dir", default=".")
    add_train_flags(p, with_schedule=False)
    p.set_defaults(func=_cmd_init, config=None)

    p = sub.add_parser("train", help="run the full training procedure")
    p.add_argument("--config", default=None,
                   help="INI config file; flags override file values")
    p.add_argument("--triples", required=True)
    p.add_argument("--wordvecs", required=True)
    p.add_argument("--sideinfo", default=None,
                   help="entity equivalence pairs file")
    p.add_argument("--sideinfo-rel", dest="sideinfo_rel", default=None,
                   help="relation equivalence pairs file")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--out", default=None,
                   help="checkpoint path (default: <out-dir>/model.ckpt)")
    p.add_argument("--verbose", action="store_true")
    add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("cluster", help="apply a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--triples", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--pipeline", action="store_true",
                   help="agglomerate encoder codes instead of reading the "
                        "mixture assignment")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("eval", help="score a predicted clustering against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--universe", choices=("all", "head"), default="all")
    p.add_argument("--triples", default=None,
                   help="triples file defining the vocabulary; required for "
                        "--universe head")
    p.add_argument("--machine", action="store_true",
                   help="also print key=value lines")
    p.add_argument("--out", default=None, help="write key=value lines here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gen-synth", help="generate a synthetic benchmark")
    p.add_argument("--entities", type=int, default=20)
    p.add_argument("--forms-per-entity", dest="forms_per_entity", type=int,
                   default=3)
    p.add_argument("--relations", type=int, default=10)
    p.add_argument("--paraphrases", type=int, default=2)
    p.add_argument("--num-triples", dest="num_triples", type=int, default=600)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--vec-dim", dest="vec_dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("build-gold",
                       help="connected components of scored coreference pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--triples", default=None,
                   help="also keep only triples touching a gold cluster")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_build_gold)

    p = sub.add_parser("split", help="random two-way split of a triples file")
    p.add_argument("--triples", required=True)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_split)

    return parser


def cmd(argv) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (KgcanonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cmd(sys.argv[1:]))
