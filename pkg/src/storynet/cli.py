"""Pipeline orchestration: one subcommand per stage, file-to-file transforms.

Every stage reads the previous stage's export, so rerunning any stage with
identical inputs and config produces byte-identical artifacts. The fully
resolved configuration of each run is written into the output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import actants, denscluster, rev2seq, sent2imp, storygraph, synth
from .config import ConfigConflict, MissingInput, PipelineConfig
from .embedstore import EmbeddingTable
from .ingest import StopEntityList, filter_eligible_events, lemmatize_corpus, load_corpus

log = logging.getLogger("storynet")


def _require(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise MissingInput("<unset>", what)
    p = Path(path)
    if not p.exists():
        raise MissingInput(p, what)
    return p


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {
        name: getattr(args, name)
        for name in PipelineConfig.field_names()
        if hasattr(args, name)
    }
    cfg = cfg.with_overrides(**overrides)
    log.info("resolved config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    return cfg


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_stops(args: argparse.Namespace) -> StopEntityList:
    if getattr(args, "stop_entities", None):
        return StopEntityList.load(_require(args.stop_entities, "stop-entity file"))
    return StopEntityList()


def _load_stopwords(args: argparse.Namespace) -> frozenset[str]:
    if getattr(args, "stopwords", None):
        return denscluster.load_stopwords(_require(args.stopwords, "stopword file"))
    return denscluster.default_stopwords()


def _load_exclusions(args: argparse.Namespace) -> frozenset[str]:
    if getattr(args, "exclude_clusters", None):
        path = _require(args.exclude_clusters, "cluster exclusion file")
        return frozenset(
            line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()
        )
    return frozenset()


def _read_corpus(args: argparse.Namespace):
    tuples = _require(args.tuples, "tuple file")
    reviews = _require(args.reviews, "review-text file") if args.reviews else None
    return load_corpus(tuples, reviews)


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    corpus = _read_corpus(args)
    corpus = lemmatize_corpus(corpus)
    filtered = filter_eligible_events(corpus, _load_stops(args))
    from .ingest import serialize_tuples

    serialize_tuples(filtered, out / "corpus.filtered.jsonl")
    cfg.write_resolved(out / "resolved_config.json")
    log.info("ingest: %d/%d tuples survive filtering",
             filtered.n_tuples, corpus.n_tuples)
    return 0


def _actants_products(args: argparse.Namespace, cfg: PipelineConfig):
    corpus = _read_corpus(args)
    corpus = lemmatize_corpus(corpus)
    filtered = filter_eligible_events(corpus, _load_stops(args))
    seed_map = actants.MentionMap.load(_require(args.characters, "character seed file"))
    table = EmbeddingTable.load(_require(args.embeddings, "embedding file"))
    stopwords = _load_stopwords(args)
    mention_map = actants.emg_resolve(filtered, seed_map, table, cfg.sim_threshold)
    cluster_sets = actants.iarc_all_pairs(
        filtered, mention_map, table,
        excluded_labels=_load_exclusions(args),
        min_cluster_size=cfg.min_cluster_size,
        eps=cfg.eps,
        merge_threshold=cfg.merge_threshold,
        stopwords=stopwords,
    )
    vocabulary = actants.event_vocabulary(cluster_sets)
    sequences = actants.build_event_sequences(filtered, mention_map, cluster_sets, vocabulary)
    return corpus, filtered, mention_map, cluster_sets, vocabulary, sequences


def cmd_actants(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    _, _, mention_map, cluster_sets, vocabulary, sequences = _actants_products(args, cfg)
    mention_map.save(out / "mention_map.tsv")
    actants.write_cluster_records(cluster_sets, out / "clusters.jsonl")
    actants.write_event_records(vocabulary, sequences, out / "events.jsonl")
    cfg.write_resolved(out / "resolved_config.json")
    log.info("actants: %d mentions mapped, %d events in vocabulary",
             len(mention_map.mapping), len(vocabulary))
    return 0


def cmd_storygraph(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    corpus = _read_corpus(args)
    corpus = lemmatize_corpus(corpus)
    filtered = filter_eligible_events(corpus, _load_stops(args))
    mention_map = actants.MentionMap.load(_require(args.characters, "mention map file"))
    cluster_sets = actants.read_cluster_records(_require(args.clusters, "cluster records"))
    regular = storygraph.build_regular_graph(cluster_sets, mention_map.characters)
    candidates = storygraph.rank_candidates(filtered, mention_map, cfg.top_k_candidates)
    expanded = storygraph.expand_graph(
        regular, candidates, filtered, mention_map,
        min_edge_support=cfg.min_edge_support, min_degree=cfg.min_degree,
    )
    (out / "candidates.json").write_text(
        json.dumps(candidates, ensure_ascii=False) + "\n", encoding="utf-8")
    storygraph.write_graph_records(expanded, args.graph_out or out / "graph.jsonl")
    storygraph.graph_to_dot(expanded, args.dot or out / "graph.dot")
    cfg.write_resolved(out / "resolved_config.json")
    log.info("storygraph: %d nodes, %d edges after expansion",
             len(expanded.nodes), len(expanded.edges))
    return 0


def cmd_rev2seq_build(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    vocabulary, sequences = actants.read_event_records(_require(args.events, "event records"))
    matrix = rev2seq.build_precedence_matrix(
        sequences, len(vocabulary), pairs=cfg.pairs, per_review_dedup=cfg.per_review_dedup)
    matrix = rev2seq.preprocess(matrix, cfg.start_const, cfg.term_const)
    matrix = rev2seq.resolve_two_cycles(matrix)
    names = {e.id: e.key for e in vocabulary}
    graph = rev2seq.sbfs(matrix, names)
    graph = rev2seq.transitive_reduce(graph)
    rev2seq.write_sequence_records(graph, out / "sequence.jsonl")
    rev2seq.sequence_to_dot(graph, out / "sequence.dot")
    metrics = {
        "n_events": matrix.n_events,
        "dropped_weight": graph.dropped_weight,
        "total_weight": graph.total_weight,
        "dropped_weight_fraction": graph.dropped_fraction,
    }
    (out / "sequence_metrics.json").write_text(
        json.dumps(metrics, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    cfg.write_resolved(out / "resolved_config.json")
    log.info("rev2seq: %d events, dropped weight fraction %.4f",
             matrix.n_events, graph.dropped_fraction)
    return 0


def cmd_rev2seq_score(args: argparse.Namespace) -> int:
    graph = rev2seq.read_sequence_records(_require(args.sequence, "sequence records"))
    labels = rev2seq.load_labels(_require(args.labels, "label file"))
    report = rev2seq.score(graph, labels)
    print(json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2))
    return 0


def cmd_rev2seq_export(args: argparse.Namespace) -> int:
    graph = rev2seq.read_sequence_records(_require(args.sequence, "sequence records"))
    rev2seq.sequence_to_dot(graph, args.dot)
    return 0


def _mixtures(args: argparse.Namespace, cfg: PipelineConfig):
    corpus = _read_corpus(args)
    mention_map = actants.MentionMap.load(_require(args.characters, "mention map file"))
    table = EmbeddingTable.load(_require(args.embeddings, "embedding file"))
    stopwords = _load_stopwords(args)
    descriptors = sent2imp.select_svcop(corpus, mention_map)
    mixtures = {}
    for character in sorted(descriptors):
        mixtures[character] = sent2imp.build_mixture(
            character, descriptors[character], table, corpus,
            min_cluster_size=cfg.min_cluster_size, eps=cfg.eps,
            merge_threshold=cfg.merge_threshold, tau_skew=cfg.tau_skew,
            tau_mean=cfg.tau_mean, tau_var=cfg.tau_var, stopwords=stopwords,
        )
    return mixtures, table


def _mixture_record(m: sent2imp.ImpressionMixture) -> dict:
    return {
        "character": m.character,
        "clusters": [
            {"id": c.id, "label": c.label, "members": c.phrases}
            for c in sorted(m.clusters, key=lambda c: c.id)
        ],
        "noise": m.noise.phrases if m.noise is not None else [],
    }


def cmd_sent2imp_profile(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    mixtures, _ = _mixtures(args, cfg)
    if args.character is not None:
        if args.character not in mixtures:
            raise MissingInput(args.character, "character with SVCOP descriptors")
        selected = {args.character: mixtures[args.character]}
    else:
        selected = mixtures
    for character in sorted(selected):
        print(json.dumps(_mixture_record(selected[character]),
                         ensure_ascii=False, sort_keys=True))
    return 0


def cmd_sent2imp_heatmap(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    mixtures, table = _mixtures(args, cfg)
    for name in (args.a, args.b or args.a):
        if name not in mixtures:
            raise MissingInput(name, "character with SVCOP descriptors")
    a = mixtures[args.a]
    b = mixtures[args.b] if args.b else a
    heatmap = sent2imp.mixture_heatmap(a, b, table, cfg.pca_components)
    record = {
        "a": a.character,
        "b": b.character,
        "row_labels": heatmap.row_labels,
        "col_labels": heatmap.col_labels,
        "values": [[round(float(v), 9) for v in row] for row in heatmap.values],
    }
    print(json.dumps(record, ensure_ascii=False, sort_keys=True))
    if args.plot:
        _plot_heatmap(heatmap, args.plot)
    return 0


def _plot_heatmap(heatmap: sent2imp.Heatmap, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(max(4, len(heatmap.col_labels)),
                                    max(3, len(heatmap.row_labels))))
    im = ax.imshow(heatmap.values, cmap="coolwarm", vmin=-2.0, vmax=2.0)
    ax.set_xticks(range(len(heatmap.col_labels)), heatmap.col_labels,
                  rotation=45, ha="right")
    ax.set_yticks(range(len(heatmap.row_labels)), heatmap.row_labels)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_sent2imp_complexity(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    mixtures, table = _mixtures(args, cfg)
    for character in sorted(mixtures):
        m = mixtures[character]
        if m.n_clusters < 4:
            continue
        heatmap = sent2imp.mixture_heatmap(m, m, table, cfg.pca_components)
        entropy = sent2imp.character_entropy(heatmap, cfg.entropy_bins, cfg.kernel_width)
        print(json.dumps({"character": character, "n_clusters": m.n_clusters,
                          "entropy": round(entropy, 9)},
                         ensure_ascii=False, sort_keys=True))
    return 0


def cmd_synth_gen(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    gt = synth.random_ground_truth(args.events, args.seed)
    reviews = synth.generate_reviews(gt, args.reviews, args.drop, args.swap, args.seed)
    paths = synth.write_fixture_files(gt, reviews, out)
    log.info("synth: wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_run_all(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    from .ingest import serialize_tuples

    corpus, filtered, mention_map, cluster_sets, vocabulary, sequences = \
        _actants_products(args, cfg)
    serialize_tuples(filtered, out / "corpus.filtered.jsonl")
    mention_map.save(out / "mention_map.tsv")
    actants.write_cluster_records(cluster_sets, out / "clusters.jsonl")
    actants.write_event_records(vocabulary, sequences, out / "events.jsonl")

    regular = storygraph.build_regular_graph(cluster_sets, mention_map.characters)
    candidates = storygraph.rank_candidates(filtered, mention_map, cfg.top_k_candidates)
    expanded = storygraph.expand_graph(
        regular, candidates, filtered, mention_map,
        min_edge_support=cfg.min_edge_support, min_degree=cfg.min_degree)
    (out / "candidates.json").write_text(
        json.dumps(candidates, ensure_ascii=False) + "\n", encoding="utf-8")
    storygraph.write_graph_records(expanded, out / "graph.jsonl")
    storygraph.graph_to_dot(expanded, out / "graph.dot")

    matrix = rev2seq.build_precedence_matrix(
        sequences, len(vocabulary), pairs=cfg.pairs, per_review_dedup=cfg.per_review_dedup)
    matrix = rev2seq.preprocess(matrix, cfg.start_const, cfg.term_const)
    matrix = rev2seq.resolve_two_cycles(matrix)
    names = {e.id: e.key for e in vocabulary}
    graph = rev2seq.transitive_reduce(rev2seq.sbfs(matrix, names))
    rev2seq.write_sequence_records(graph, out / "sequence.jsonl")
    rev2seq.sequence_to_dot(graph, out / "sequence.dot")
    metrics = {
        "n_events": matrix.n_events,
        "dropped_weight": graph.dropped_weight,
        "total_weight": graph.total_weight,
        "dropped_weight_fraction": graph.dropped_fraction,
    }
    (out / "sequence_metrics.json").write_text(
        json.dumps(metrics, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")

    table = EmbeddingTable.load(_require(args.embeddings, "embedding file"))
    stopwords = _load_stopwords(args)
    descriptors = sent2imp.select_svcop(corpus, mention_map)
    with open(out / "impressions.jsonl", "w", encoding="utf-8") as prof, \
            open(out / "complexity.jsonl", "w", encoding="utf-8") as compl:
        for character in sorted(descriptors):
            mixture = sent2imp.build_mixture(
                character, descriptors[character], table, corpus,
                min_cluster_size=cfg.min_cluster_size, eps=cfg.eps,
                merge_threshold=cfg.merge_threshold, tau_skew=cfg.tau_skew,
                tau_mean=cfg.tau_mean, tau_var=cfg.tau_var, stopwords=stopwords)
            prof.write(json.dumps(_mixture_record(mixture),
                                  ensure_ascii=False, sort_keys=True) + "\n")
            if mixture.n_clusters >= 4:
                heatmap = sent2imp.mixture_heatmap(mixture, mixture, table,
                                                   cfg.pca_components)
                entropy = sent2imp.character_entropy(heatmap, cfg.entropy_bins,
                                                     cfg.kernel_width)
                compl.write(json.dumps(
                    {"character": character, "n_clusters": mixture.n_clusters,
                     "entropy": round(entropy, 9)},
                    ensure_ascii=False, sort_keys=True) + "\n")

    cfg.write_resolved(out / "resolved_config.json")
    log.info("run all: artifacts in %s", out)
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override file values")
    p.add_argument("--out-dir", default="out", help="artifact directory")
    p.add_argument("--min-cluster-size", dest="min_cluster_size", type=int)
    p.add_argument("--eps", type=float, help="density clustering distance threshold")
    p.add_argument("--merge-threshold", dest="merge_threshold", type=float)
    p.add_argument("--stopwords", help="stopword file overriding the built-in list")


def _add_corpus_flags(p: argparse.ArgumentParser, reviews_required: bool = True) -> None:
    p.add_argument("--tuples", required=True, help="relationship tuple file")
    p.add_argument("--reviews", required=reviews_required, help="raw review-text file")
    p.add_argument("--stop-entities", dest="stop_entities",
                   help="stop-entity file (default built-in list)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storynet",
        description="Consensus story networks, event sequencing and impressions from reviews")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, validate and filter the tuple file")
    _add_corpus_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("actants", help="mention grouping, relation clustering, events")
    _add_corpus_flags(p)
    p.add_argument("--characters", required=True, help="seed mention map file")
    p.add_argument("--embeddings", required=True, help="phrase embedding file")
    p.add_argument("--exclude-clusters", dest="exclude_clusters",
                   help="file of cluster labels to mark non-sequenceable")
    p.add_argument("--sim-threshold", dest="sim_threshold", type=float)
    _add_config_flags(p)
    p.set_defaults(func=cmd_actants)

    p = sub.add_parser("storygraph", help="regular and expanded story networks")
    _add_corpus_flags(p)
    p.add_argument("--characters", required=True, help="resolved mention map file")
    p.add_argument("--clusters", required=True, help="cluster records from the actants stage")
    p.add_argument("--top-k", dest="top_k_candidates", type=int)
    p.add_argument("--min-edge-support", dest="min_edge_support", type=int)
    p.add_argument("--min-degree", dest="min_degree", type=int)
    p.add_argument("--dot", help="DOT export path")
    p.add_argument("--graph-out", dest="graph_out", help="structured export path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_storygraph)

    p = sub.add_parser("rev2seq", help="consensus event sequencing")
    seq_sub = p.add_subparsers(dest="subcommand", required=True)

    pb = seq_sub.add_parser("build", help="precedence matrix, cycle handling, timeline")
    pb.add_argument("--events", required=True, help="event records from the actants stage")
    pb.add_argument("--start-const", dest="start_const", type=float)
    pb.add_argument("--term-const", dest="term_const", type=float)
    pb.add_argument("--pairs", choices=("adjacent", "all"))
    pb.add_argument("--per-review-dedup", dest="per_review_dedup",
                    action="store_const", const=True, default=None)
    _add_config_flags(pb)
    pb.set_defaults(func=cmd_rev2seq_build)

    ps = seq_sub.add_parser("score", help="score a sequence against judge labels")
    ps.add_argument("--sequence", required=True, help="sequence records")
    ps.add_argument("--labels", required=True, help="judge label file")
    ps.set_defaults(func=cmd_rev2seq_score)

    pe = seq_sub.add_parser("export", help="export a sequence as DOT")
    pe.add_argument("--sequence", required=True, help="sequence records")
    pe.add_argument("--dot", required=True, help="DOT output path")
    pe.set_defaults(func=cmd_rev2seq_export)

    p = sub.add_parser("sent2imp", help="character impression mixtures")
    imp_sub = p.add_subparsers(dest="subcommand", required=True)

    def _imp_parser(name: str, help_text: str) -> argparse.ArgumentParser:
        q = imp_sub.add_parser(name, help=help_text)
        _add_corpus_flags(q)
        q.add_argument("--characters", required=True, help="mention map file")
        q.add_argument("--embeddings", required=True, help="phrase embedding file")
        q.add_argument("--tau-skew", dest="tau_skew", type=float)
        q.add_argument("--tau-mean", dest="tau_mean", type=float)
        q.add_argument("--tau-var", dest="tau_var", type=float)
        _add_config_flags(q)
        return q

    pp = _imp_parser("profile", "emit impression mixtures")
    pp.add_argument("--character", help="restrict output to one character id")
    pp.set_defaults(func=cmd_sent2imp_profile)

    ph = _imp_parser("heatmap", "similarity heatmap for one or two characters")
    ph.add_argument("--a", required=True, help="first character id")
    ph.add_argument("--b", help="second character id (defaults to --a)")
    ph.add_argument("--plot", help="optional static plot file")
    ph.set_defaults(func=cmd_sent2imp_heatmap)

    pc = _imp_parser("complexity", "entropy per character with at least 4 clusters")
    pc.set_defaults(func=cmd_sent2imp_complexity)

    p = sub.add_parser("synth", help="synthetic corpora with known ground truth")
    synth_sub = p.add_subparsers(dest="subcommand", required=True)
    pg = synth_sub.add_parser("gen", help="generate a synthetic fixture")
    pg.add_argument("--events", type=int, required=True)
    pg.add_argument("--reviews", type=int, required=True)
    pg.add_argument("--drop", type=float, default=0.0)
    pg.add_argument("--swap", type=float, default=0.0)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out-dir", default="out")
    pg.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("run", help="run pipeline stages")
    run_sub = p.add_subparsers(dest="subcommand", required=True)
    pa = run_sub.add_parser("all", help="run every stage over one corpus")
    _add_corpus_flags(pa)
    pa.add_argument("--characters", required=True, help="seed mention map file")
    pa.add_argument("--embeddings", required=True, help="phrase embedding file")
    pa.add_argument("--exclude-clusters", dest="exclude_clusters")
    pa.add_argument("--sim-threshold", dest="sim_threshold", type=float)
    pa.add_argument("--tau-skew", dest="tau_skew", type=float)
    pa.add_argument("--tau-mean", dest="tau_mean", type=float)
    pa.add_argument("--tau-var", dest="tau_var", type=float)
    _add_config_flags(pa)
    pa.set_defaults(func=cmd_run_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (MissingInput, ConfigConflict) as exc:
        log.error("%s", exc)
        return 2
    except (ValueError, KeyError, FileNotFoundError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
