import pytest

import fixture_corpus
from storynet.actants import (
    EmptySeed,
    MentionMap,
    build_event_sequences,
    emg_resolve,
    event_vocabulary,
    iarc,
    iarc_all_pairs,
    read_cluster_records,
    read_event_records,
    write_cluster_records,
    write_event_records,
)
from storynet.ingest import filter_eligible_events, lemmatize_corpus


@pytest.fixture(scope="module")
def seed_map():
    return MentionMap(
        mapping={m: c for m, c, _ in fixture_corpus.CHARACTERS},
        characters={c: d for _, c, d in fixture_corpus.CHARACTERS},
    )


@pytest.fixture(scope="module")
def filtered(mini_corpus):
    return filter_eligible_events(lemmatize_corpus(mini_corpus))


@pytest.fixture(scope="module")
def resolved(filtered, seed_map, mini_table):
    return emg_resolve(filtered, seed_map, mini_table, sim_threshold=0.85)


@pytest.fixture(scope="module")
def cluster_sets(filtered, resolved, mini_table):
    return iarc_all_pairs(filtered, resolved, mini_table)


class TestMentionMap:
    def test_empty_seed_rejected(self):
        with pytest.raises(EmptySeed):
            MentionMap(mapping={}, characters={})

    def test_surjectivity_enforced(self):
        with pytest.raises(ValueError):
            MentionMap(mapping={"bilbo": "bilbo"},
                       characters={"bilbo": "Bilbo", "gandalf": "Gandalf"})

    def test_load_save_roundtrip(self, tmp_path, seed_map):
        path = tmp_path / "map.tsv"
        seed_map.save(path)
        again = MentionMap.load(path)
        assert again.mapping == seed_map.mapping
        assert again.characters == seed_map.characters

    def test_resolve_case_folds(self, seed_map):
        assert seed_map.resolve("BILBO") == "bilbo"
        assert seed_map.resolve("nobody") is None


class TestEmgResolve:
    def test_alias_with_shared_profile_mapped(self, resolved):
        assert resolved.resolve("baggins") == "bilbo"

    def test_candidates_stay_unmapped(self, resolved):
        assert resolved.resolve("tolkien") is None
        assert resolved.resolve("movie") is None

    def test_seed_entries_never_overridden(self, filtered, seed_map, mini_table):
        out = emg_resolve(filtered, seed_map, mini_table, sim_threshold=-1.0)
        for mention, char in seed_map.mapping.items():
            assert out.mapping[mention] == char

    def test_output_remains_surjective(self, resolved, seed_map):
        mapped = set(resolved.mapping.values())
        assert mapped == set(seed_map.characters)

    def test_mention_without_relations_unmapped(self, seed_map, mini_table, filtered):
        out = emg_resolve(filtered, seed_map, mini_table, sim_threshold=0.85)
        assert out.resolve("completely absent mention") is None


class TestIarc:
    def test_semantically_close_phrases_one_cluster(self, filtered, resolved, mini_table):
        cs = iarc(filtered, resolved, ("bilbo", "smaug"), mini_table)
        real = [c for c in cs.clusters if not c.is_noise]
        assert len(real) == 1
        assert sorted(set(real[0].phrases)) == ["deceives", "tricks"]
        assert real[0].label == fixture_corpus.LABEL_DECEIVE
        assert not real[0].non_sequenceable

    def test_merge_of_near_duplicate_clusters(self, filtered, resolved, mini_table):
        cs = iarc(filtered, resolved, ("gandalf", "bilbo"), mini_table)
        real = [c for c in cs.clusters if not c.is_noise]
        assert len(real) == 1
        assert sorted(set(real[0].phrases)) == ["chooses", "chose", "recruit", "recruits"]
        assert real[0].label == fixture_corpus.LABEL_RECRUIT

    def test_blocklisted_cluster_marked_non_sequenceable(self, filtered, resolved, mini_table):
        cs = iarc(filtered, resolved, ("bilbo", "gandalf"), mini_table)
        real = [c for c in cs.clusters if not c.is_noise]
        assert len(real) == 1
        assert real[0].non_sequenceable
        assert real[0].label == "wish"

    def test_exclusion_file_labels(self, filtered, resolved, mini_table):
        cs = iarc(filtered, resolved, ("bard", "smaug"), mini_table,
                  excluded_labels=frozenset({fixture_corpus.LABEL_KILL}))
        real = [c for c in cs.clusters if not c.is_noise]
        assert all(c.non_sequenceable for c in real)

    def test_empty_pair_yields_empty_set(self, filtered, resolved, mini_table):
        cs = iarc(filtered, resolved, ("smaug", "bard"), mini_table)
        assert cs.clusters == []
        assert cs.labels == frozenset()

    def test_membership_is_partition(self, filtered, resolved, mini_table):
        cs = iarc(filtered, resolved, ("gandalf", "bilbo"), mini_table)
        total = sum(len(c.members) for c in cs.clusters)
        occurrences = [
            t for t in filtered
            if resolved.resolve(t.subject_head) == "gandalf"
            and resolved.resolve(t.object_head) == "bilbo"
        ]
        assert total == len(occurrences)

    def test_labels_distinct_within_pair(self, cluster_sets):
        for cs in cluster_sets:
            labels = [c.label for c in cs.clusters if not c.is_noise]
            assert len(labels) == len(set(labels))


class TestEventSequences:
    def test_vocabulary_is_dense_and_unique(self, cluster_sets):
        vocab = event_vocabulary(cluster_sets)
        assert [e.id for e in vocab] == list(range(len(vocab)))
        triples = {(e.subject, e.relation_label, e.object) for e in vocab}
        assert len(triples) == len(vocab)
        keys = {e.key for e in vocab}
        assert keys == set(fixture_corpus.EVENT_KEYS.values())

    def test_review_order_preserved(self, filtered, resolved, cluster_sets):
        sequences = build_event_sequences(filtered, resolved, cluster_sets)
        r1 = [e.key for e in sequences["r1"]]
        assert r1 == [fixture_corpus.EVENT_KEYS["recruit"],
                      fixture_corpus.EVENT_KEYS["deceive"],
                      fixture_corpus.EVENT_KEYS["kill"]]
        r5 = [e.key for e in sequences["r5"]]
        assert r5 == [fixture_corpus.EVENT_KEYS["recruit"],
                      fixture_corpus.EVENT_KEYS["kill"],
                      fixture_corpus.EVENT_KEYS["deceive"]]

    def test_unmappable_review_empty(self, filtered, resolved, cluster_sets):
        sequences = build_event_sequences(filtered, resolved, cluster_sets)
        assert sequences["r8"] == []

    def test_non_sequenceable_tuples_skipped(self, filtered, resolved, cluster_sets):
        sequences = build_event_sequences(filtered, resolved, cluster_sets)
        for seq in sequences.values():
            for event in seq:
                assert "wish" not in event.relation_label

    def test_alias_events_counted(self, filtered, resolved, cluster_sets):
        sequences = build_event_sequences(filtered, resolved, cluster_sets)
        r7 = [e.key for e in sequences["r7"]]
        assert r7 == [fixture_corpus.EVENT_KEYS["recruit"],
                      fixture_corpus.EVENT_KEYS["deceive"]]

    def test_consecutive_duplicates_collapse(self, resolved, cluster_sets):
        vocab = event_vocabulary(cluster_sets)
        from storynet.ingest import ReviewCorpus, RelationTuple, TupleKind

        twice = ReviewCorpus(reviews={"rx": [
            RelationTuple("rx", 0, "Gandalf", "Gandalf", "recruits", "Bilbo", "Bilbo",
                          TupleKind.SVO, frozenset(), "Gandalf recruits Bilbo."),
            RelationTuple("rx", 1, "Gandalf", "Gandalf", "recruit", "Bilbo", "Bilbo",
                          TupleKind.SVO, frozenset(), "Gandalf recruit Bilbo."),
        ]})
        sequences = build_event_sequences(twice, resolved, cluster_sets, vocab)
        assert len(sequences["rx"]) == 1

    def test_every_event_label_in_pair_labels(self, filtered, resolved, cluster_sets):
        by_pair = {cs.pair: cs.labels for cs in cluster_sets}
        sequences = build_event_sequences(filtered, resolved, cluster_sets)
        for seq in sequences.values():
            for e in seq:
                assert e.relation_label in by_pair[(e.subject, e.object)]


class TestRecords:
    def test_cluster_records_roundtrip(self, tmp_path, cluster_sets):
        path = tmp_path / "clusters.jsonl"
        write_cluster_records(cluster_sets, path)
        again = read_cluster_records(path)
        assert [cs.pair for cs in again] == sorted(cs.pair for cs in cluster_sets)
        for cs in again:
            original = next(o for o in cluster_sets if o.pair == cs.pair)
            assert cs.labels == original.labels
            assert [c.phrases for c in cs.clusters] == \
                   [c.phrases for c in sorted(original.clusters, key=lambda c: c.id)]

    def test_event_records_roundtrip(self, tmp_path, filtered, resolved, cluster_sets):
        vocab = event_vocabulary(cluster_sets)
        sequences = build_event_sequences(filtered, resolved, cluster_sets, vocab)
        path = tmp_path / "events.jsonl"
        write_event_records(vocab, sequences, path)
        vocab2, sequences2 = read_event_records(path)
        assert vocab2 == vocab
        assert {r: [e.id for e in s] for r, s in sequences2.items()} == \
               {r: [e.id for e in s] for r, s in sequences.items()}
