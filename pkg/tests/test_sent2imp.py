import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from storynet.actants import MentionMap
from storynet.denscluster import NOISE_ID, PhraseCluster
from storynet.embedstore import EmbeddingTable
from storynet.ingest import ReviewCorpus, RelationTuple, TupleKind
from storynet.sent2imp import (
    AsymmetricInput,
    DegenerateVariance,
    EmptyCluster,
    Heatmap,
    ImpressionMixture,
    TooFewClusters,
    build_mixture,
    character_entropy,
    cluster_pair_similarity,
    filter_clusters,
    mixture_heatmap,
    select_svcop,
    skewness,
    word_scores,
)

SNOWBALL_MAP = MentionMap(mapping={"snowball": "snowball"},
                          characters={"snowball": "Snowball"})


def svcop(review, pos, subj, descriptor):
    return RelationTuple(review, pos, subj, subj, "was", descriptor,
                         descriptor.split()[-1], TupleKind.SVCOP, frozenset(),
                         f"{subj} was {descriptor}.")


class TestSelectSvcop:
    def test_two_copular_descriptors(self):
        corpus = ReviewCorpus(reviews={"r1": [
            svcop("r1", 0, "Snowball", "humble"),
            svcop("r1", 1, "Snowball", "a good leader"),
        ]})
        out = select_svcop(corpus, SNOWBALL_MAP)
        assert out == {"snowball": ["humble", "a good leader"]}

    def test_svo_excluded(self):
        corpus = ReviewCorpus(reviews={"r1": [
            RelationTuple("r1", 0, "Snowball", "Snowball", "leads", "farm", "farm",
                          TupleKind.SVO, frozenset(), "Snowball leads the farm."),
        ]})
        assert select_svcop(corpus, SNOWBALL_MAP) == {}

    def test_unmapped_subject_excluded(self):
        corpus = ReviewCorpus(reviews={"r1": [svcop("r1", 0, "Boxer", "loyal")]})
        assert select_svcop(corpus, SNOWBALL_MAP) == {}


def cluster_of(phrases, cluster_id=0):
    return PhraseCluster(id=cluster_id,
                         members=[(p, np.ones(2)) for p in phrases])


class TestWordScores:
    def three_doc_corpus(self):
        return ReviewCorpus(reviews={}, raw_texts={
            "d1": "wizard wizard staff",
            "d2": "hobbit ring",
            "d3": "dragon gold gold hoard",
        })

    def test_spreadsheet_oracle(self):
        # independently: corpus has 9 tokens; "wizard" occurs twice in one
        # of three documents -> tf = 2/9, idf = ln(3/(1+1)); in-cluster
        # frequency 2 -> score = 2/9 * ln(1.5) * 2
        corpus = self.three_doc_corpus()
        c = cluster_of(["wizard", "wizard"])
        scores = word_scores(c, corpus, stopwords=frozenset())
        expected = (2.0 / 9.0) * math.log(3.0 / 2.0) * 2.0
        assert scores["wizard"] == pytest.approx(expected, abs=1e-12)

    def test_word_absent_from_corpus_scores_zero(self):
        corpus = self.three_doc_corpus()
        scores = word_scores(cluster_of(["balrog"]), corpus, stopwords=frozenset())
        assert scores["balrog"] == 0.0

    def test_single_word_cluster_positive(self):
        corpus = self.three_doc_corpus()
        scores = word_scores(cluster_of(["hobbit"]), corpus, stopwords=frozenset())
        assert set(scores) == {"hobbit"}
        assert scores["hobbit"] > 0.0

    def test_stopwords_removed_before_scoring(self):
        corpus = self.three_doc_corpus()
        scores = word_scores(cluster_of(["the wizard"]), corpus,
                             stopwords=frozenset({"the"}))
        assert set(scores) == {"wizard"}

    def test_empty_cluster(self):
        with pytest.raises(EmptyCluster):
            word_scores(PhraseCluster(id=0, members=[]), self.three_doc_corpus())


class TestSkewness:
    def test_symmetric_sample_zero(self):
        assert skewness([1.0, 2.0, 3.0]) == 0.0

    def test_against_independent_oracle(self):
        # closed form: mean 4, m2 = 38/3, m3 = 30
        value = skewness([1.0, 2.0, 9.0])
        assert value == pytest.approx(30.0 / (38.0 / 3.0) ** 1.5, abs=1e-12)
        assert value == pytest.approx(stats.skew([1.0, 2.0, 9.0], bias=True), abs=1e-12)

    def test_degenerate_variance(self):
        with pytest.raises(DegenerateVariance):
            skewness([5.0, 5.0, 5.0])

    def test_random_samples_match_scipy(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            samples = rng.normal(size=int(rng.integers(3, 40)))
            assert skewness(samples) == pytest.approx(
                stats.skew(samples, bias=True), abs=1e-9)


def corpus_for_filtering():
    # make "rare" very rare and "common" ubiquitous so scores spread
    texts = {f"d{i}": "common filler words here" for i in range(9)}
    texts["d9"] = "rare gem shining common"
    return ReviewCorpus(reviews={}, raw_texts=texts)


class TestFilterClusters:
    def test_high_mean_low_variance_kept(self):
        corpus = corpus_for_filtering()
        wizard = cluster_of(["rare", "rare", "rare"])
        mixture = filter_clusters("c", [wizard], corpus,
                                  tau_skew=10.0, tau_mean=0.0, tau_var=1.0,
                                  stopwords=frozenset())
        assert mixture.clusters == [wizard]

    def test_skewed_cluster_kept(self):
        # one high-scoring word against four zero-scoring ones: skew 1.5
        corpus = corpus_for_filtering()
        skewed = cluster_of(["rare", "xq1", "xq2", "xq3", "xq4"])
        scores = word_scores(skewed, corpus, stopwords=frozenset())
        assert skewness(list(scores.values())) > 1.0
        mixture = filter_clusters("c", [skewed], corpus, tau_skew=1.0,
                                  tau_mean=1e9, tau_var=0.0,
                                  stopwords=frozenset())
        assert mixture.clusters == [skewed]

    def test_flat_low_cluster_dropped(self):
        corpus = corpus_for_filtering()
        flat = cluster_of(["common", "filler", "words"])
        mixture = filter_clusters("c", [flat], corpus, tau_skew=10.0,
                                  tau_mean=1e9, tau_var=1e-12,
                                  stopwords=frozenset())
        assert mixture.clusters == []

    def test_monotone_in_tau_skew(self):
        corpus = corpus_for_filtering()
        clusters = [
            cluster_of(["rare", "filler", "words", "here", "gem"], cluster_id=0),
            cluster_of(["common", "filler", "words"], cluster_id=1),
        ]
        kept_sizes = []
        for tau in (-10.0, 0.0, 1.0, 5.0, 50.0):
            mixture = filter_clusters("c", clusters, corpus, tau_skew=tau,
                                      tau_mean=1e9, tau_var=0.0,
                                      stopwords=frozenset())
            kept_sizes.append(len(mixture.clusters))
        assert kept_sizes == sorted(kept_sizes, reverse=True)

    def test_noise_cluster_carried_through(self):
        corpus = corpus_for_filtering()
        noise = PhraseCluster(id=NOISE_ID, members=[("junk", np.ones(2))])
        mixture = filter_clusters("c", [noise], corpus)
        assert mixture.noise is noise
        assert mixture.clusters == []


def vec_cluster(vectors, cluster_id=0, label=""):
    members = [(f"p{cluster_id}-{i}", np.asarray(v, dtype=float))
               for i, v in enumerate(vectors)]
    return PhraseCluster(id=cluster_id, members=members, label=label)


class TestClusterPairSimilarity:
    def test_identical_singletons(self):
        a = vec_cluster([[1.0, 2.0]])
        b = vec_cluster([[1.0, 2.0]], cluster_id=1)
        assert cluster_pair_similarity(a, b) == pytest.approx(2.0, abs=1e-9)

    def test_antipodal_singletons(self):
        a = vec_cluster([[1.0, 0.0]])
        b = vec_cluster([[-1.0, 0.0]], cluster_id=1)
        assert cluster_pair_similarity(a, b) == pytest.approx(-2.0, abs=1e-9)

    def test_hand_brute_force(self):
        # left {e1, e2} against right {e1}: best matches 1 and 0 -> mean 0.5,
        # reverse side best match 1 -> total 1.5
        a = vec_cluster([[1.0, 0.0], [0.0, 1.0]])
        b = vec_cluster([[1.0, 0.0]], cluster_id=1)
        assert cluster_pair_similarity(a, b) == pytest.approx(1.5, abs=1e-12)

    def test_empty_cluster(self):
        with pytest.raises(EmptyCluster):
            cluster_pair_similarity(PhraseCluster(id=0, members=[]),
                                    vec_cluster([[1.0, 0.0]]))

    def test_brute_force_oracle_random(self):
        from storynet.embedstore import cosine

        rng = np.random.default_rng(31)
        for _ in range(50):
            a = rng.normal(size=(int(rng.integers(1, 6)), 4))
            b = rng.normal(size=(int(rng.integers(1, 6)), 4))
            got = cluster_pair_similarity(vec_cluster(a), vec_cluster(b, 1))
            s1 = np.mean([max(cosine(u, v) for v in b) for u in a])
            s2 = np.mean([max(cosine(u, v) for u in a) for v in b])
            assert got == pytest.approx(float(s1 + s2), abs=1e-9)


_cluster_matrix = arrays(
    np.float64,
    st.tuples(st.integers(1, 5), st.just(4)),
    elements=st.floats(-50, 50),
).filter(lambda m: bool(np.all(np.linalg.norm(m, axis=1) > 1e-6)))


@given(_cluster_matrix, _cluster_matrix)
@settings(max_examples=200)
def test_pair_similarity_symmetric_and_bounded(a, b):
    s_ab = cluster_pair_similarity(a, b)
    assert -2.0 <= s_ab <= 2.0
    assert abs(s_ab - cluster_pair_similarity(b, a)) <= 1e-12


@given(_cluster_matrix)
@settings(max_examples=200)
def test_pair_similarity_self_is_two(a):
    assert abs(cluster_pair_similarity(a, a) - 2.0) <= 1e-9


@given(_cluster_matrix, _cluster_matrix,
       st.floats(0.01, 100.0), st.floats(0.01, 100.0))
@settings(max_examples=200)
def test_pair_similarity_scale_invariant(a, b, alpha, beta):
    assert abs(cluster_pair_similarity(alpha * a, beta * b)
               - cluster_pair_similarity(a, b)) <= 1e-12


def mixture_from(table, groups, character="hero"):
    clusters = []
    for i, phrases in enumerate(groups):
        members = [(p, table.vectors[p]) for p in phrases]
        clusters.append(PhraseCluster(id=i, members=members, label=f"g{i}"))
    return ImpressionMixture(character=character, clusters=clusters)


@pytest.fixture(scope="module")
def descriptor_table():
    rng = np.random.default_rng(7)
    vectors = {}
    for g in range(5):
        base = np.zeros(16)
        base[g * 3] = 4.0
        for i in range(3):
            jitter = rng.normal(scale=0.05, size=16)
            vectors[f"g{g}p{i}"] = base + jitter
    return EmbeddingTable(dim=16, vectors=vectors)


class TestMixtureHeatmap:
    def test_self_heatmap_symmetric_diagonal_two(self, descriptor_table):
        groups = [[f"g{g}p{i}" for i in range(3)] for g in range(4)]
        m = mixture_from(descriptor_table, groups)
        h = mixture_heatmap(m, m, descriptor_table, components=4)
        assert h.values.shape == (4, 4)
        assert h.is_symmetric
        assert np.allclose(np.diag(h.values), 2.0, atol=1e-9)
        assert np.all(h.values >= -2.0 - 1e-9) and np.all(h.values <= 2.0 + 1e-9)

    def test_one_by_one_equals_pair_similarity(self, descriptor_table):
        from storynet.embedstore import pca_project

        a = mixture_from(descriptor_table, [["g0p0", "g0p1"]], character="a")
        b = mixture_from(descriptor_table, [["g1p0", "g1p1"]], character="b")
        h = mixture_heatmap(a, b, descriptor_table, components=4)
        assert h.values.shape == (1, 1)

        sets = [(c.phrases, c.matrix()) for c in a.clusters + b.clusters]
        pa, pb = pca_project(sets, k=4)
        expected = cluster_pair_similarity(pa.vectors, pb.vectors)
        assert h.values[0, 0] == pytest.approx(expected, abs=1e-9)

    def test_rectangular_cross_character(self, descriptor_table):
        a = mixture_from(descriptor_table,
                         [[f"g{g}p{i}" for i in range(3)] for g in range(3)], "a")
        b = mixture_from(descriptor_table,
                         [[f"g{g}p{i}" for i in range(3)] for g in (3, 4)], "b")
        h = mixture_heatmap(a, b, descriptor_table, components=4)
        assert h.values.shape == (3, 2)
        assert len(h.row_labels) == 3 and len(h.col_labels) == 2

    def test_components_clamped_to_pool(self, descriptor_table):
        a = mixture_from(descriptor_table, [["g0p0"]], "a")
        b = mixture_from(descriptor_table, [["g1p0"]], "b")
        h = mixture_heatmap(a, b, descriptor_table, components=4)
        assert h.values.shape == (1, 1)

    def test_deterministic(self, descriptor_table):
        groups = [[f"g{g}p{i}" for i in range(3)] for g in range(4)]
        m = mixture_from(descriptor_table, groups)
        h1 = mixture_heatmap(m, m, descriptor_table)
        h2 = mixture_heatmap(m, m, descriptor_table)
        assert np.array_equal(h1.values, h2.values)
        assert h1.row_labels == h2.row_labels

    def test_empty_mixture_rejected(self, descriptor_table):
        empty = ImpressionMixture(character="x", clusters=[])
        full = mixture_from(descriptor_table, [["g0p0"]])
        with pytest.raises(TooFewClusters):
            mixture_heatmap(empty, full, descriptor_table)


def symmetric_heatmap(values):
    values = np.asarray(values, dtype=float)
    labels = [f"c{i}" for i in range(values.shape[0])]
    return Heatmap(row_labels=labels, col_labels=labels, values=values)


def entropy_oracle(values, bins, width):
    """Straightforward reimplementation used as an independent check."""
    edges = np.linspace(-2.0, 2.0, bins + 1)
    hist = [0.0] * bins
    for v in values:
        for b in range(bins):
            lo, hi = edges[b], edges[b + 1]
            if (lo <= v < hi) or (b == bins - 1 and v == hi):
                hist[b] += 1
                break
    left = (width - 1) // 2
    right = width // 2
    smoothed = []
    for i in range(bins):
        window = [hist[j] for j in range(max(0, i - left), min(bins, i + right + 1))]
        smoothed.append(sum(window) / len(window))
    total = sum(smoothed)
    p = [s / total for s in smoothed]
    return -sum(x * math.log(x) for x in p if x > 0)


def matrix_with_lower(values, n):
    """Symmetric n x n heatmap whose strict lower triangle is `values`."""
    m = np.full((n, n), 2.0)
    idx = 0
    for i in range(n):
        for j in range(i):
            m[i, j] = m[j, i] = values[idx]
            idx += 1
    return m


class TestCharacterEntropy:
    def test_point_mass_zero(self):
        m = matrix_with_lower([0.5] * 6, 4)
        h = symmetric_heatmap(m)
        assert character_entropy(h, bins=50, kernel_width=1) == 0.0

    def test_uniform_fixture_max_entropy(self):
        # 25 clusters -> 300 sub-diagonal entries, 6 per bin at bin centers
        bins = 50
        centers = np.linspace(-2.0, 2.0, bins + 1)[:-1] + 2.0 / bins
        values = np.repeat(centers, 6)
        m = matrix_with_lower(values, 25)
        h = symmetric_heatmap(m)
        got = character_entropy(h, bins=bins, kernel_width=1)
        assert got == pytest.approx(math.log(bins), abs=1e-9)

    def test_five_by_five_fixture_matches_oracle(self):
        values = [-1.7, -0.3, 0.2, 0.9, 1.4, 1.9, 0.0, -1.2, 0.6, 1.1]
        m = matrix_with_lower(values, 5)
        h = symmetric_heatmap(m)
        got = character_entropy(h, bins=50, kernel_width=3)
        assert got == pytest.approx(entropy_oracle(values, 50, 3), abs=1e-9)

    def test_bounds_random(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            n = int(rng.integers(4, 10))
            values = rng.uniform(-2.0, 2.0, size=n * (n - 1) // 2)
            h = symmetric_heatmap(matrix_with_lower(values, n))
            for width in (1, 2, 3, 5):
                e = character_entropy(h, bins=50, kernel_width=width)
                assert 0.0 <= e <= math.log(50) + 1e-12

    def test_spreading_increases_entropy(self):
        concentrated = symmetric_heatmap(matrix_with_lower([0.1] * 6, 4))
        spread = symmetric_heatmap(matrix_with_lower(
            [-1.9, -1.0, 0.0, 0.5, 1.0, 1.9], 4))
        low = character_entropy(concentrated, bins=50, kernel_width=1)
        high = character_entropy(spread, bins=50, kernel_width=1)
        assert high > low

    def test_too_few_clusters(self):
        h = symmetric_heatmap(matrix_with_lower([0.1, 0.2, 0.3], 3))
        with pytest.raises(TooFewClusters):
            character_entropy(h)

    def test_asymmetric_rejected(self):
        values = matrix_with_lower([0.1] * 6, 4)
        values[0, 1] = 1.5
        h = Heatmap(row_labels=list("abcd"), col_labels=list("abcd"), values=values)
        with pytest.raises(AsymmetricInput):
            character_entropy(h)


@given(
    st.integers(4, 10).flatmap(
        lambda n: st.lists(st.floats(-2.0, 2.0),
                           min_size=n * (n - 1) // 2,
                           max_size=n * (n - 1) // 2)),
    st.integers(1, 7),
)
@settings(max_examples=200)
def test_entropy_bounds_property(values, width):
    n = int((1 + math.isqrt(1 + 8 * len(values))) // 2)
    h = symmetric_heatmap(matrix_with_lower(values, n))
    e = character_entropy(h, bins=50, kernel_width=width)
    assert 0.0 <= e <= math.log(50) + 1e-12


class TestBuildMixture:
    def test_fixture_character_mixture(self, mini_corpus, mini_table):
        mention_map = MentionMap(
            mapping={"bilbo": "bilbo", "gandalf": "gandalf",
                     "smaug": "smaug", "bard": "bard"},
            characters={"bilbo": "Bilbo", "gandalf": "Gandalf",
                        "smaug": "Smaug", "bard": "Bard"},
        )
        descriptors = select_svcop(mini_corpus, mention_map)
        assert len(descriptors["bilbo"]) == 13
        mixture = build_mixture("bilbo", descriptors["bilbo"], mini_table,
                                mini_corpus, tau_skew=1e9, tau_mean=-1e9,
                                tau_var=1e9)
        assert mixture.n_clusters == 4
        assert mixture.noise is not None
        assert mixture.noise.phrases == ["middle aged"]
        labels = sorted(c.label for c in mixture.clusters)
        assert labels == ["brave,courageous", "burglar,thief",
                          "hobbit,respectable", "small,little"]

    def test_wizard_single_cluster(self, mini_corpus, mini_table):
        mention_map = MentionMap(mapping={"gandalf": "gandalf"},
                                 characters={"gandalf": "Gandalf"})
        descriptors = select_svcop(mini_corpus, mention_map)
        mixture = build_mixture("gandalf", descriptors["gandalf"], mini_table,
                                mini_corpus, tau_skew=1e9, tau_mean=-1e9,
                                tau_var=1e9)
        assert mixture.n_clusters == 1
        assert mixture.clusters[0].label == "wizard"
