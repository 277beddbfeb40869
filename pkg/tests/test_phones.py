import math

import numpy as np
import pytest

from stanalyzer.features import FeatureMatrix
from stanalyzer.phones import (
    CATEGORIES,
    DimensionMismatch,
    InsufficientData,
    PhoneSet,
    Posteriorgram,
    category_posteriors,
    decode_phones,
    default_phone_set,
    forward,
    load_model,
    parse_phone_table,
    save_model,
    train_reference_model,
)

MINI_TABLE = "\n".join(
    [
        "a\tvowel",
        "t\tplosive",
        "s\tfricative",
        "n\tnasal",
        "l\tapproximant",
        "sil\tsilence",
    ]
)


@pytest.fixture
def mini_set():
    return parse_phone_table(MINI_TABLE)


def gaussian_oracle(row, mean, var):
    """Scalar-loop diagonal Gaussian density, independent of the model code."""
    density = 1.0
    for x, m, v in zip(row, mean, var):
        density *= math.exp(-((x - m) ** 2) / (2 * v)) / math.sqrt(2 * math.pi * v)
    return density


def uniform_posteriors(times, phone_set):
    n = len(phone_set)
    p = np.full((times.size, n), 1.0 / n)
    return Posteriorgram(frame_times_s=times, p=p, phone_set=phone_set)


def posteriors_from_indices(indices, phone_set, hop_s=0.010, peak=0.9):
    n = len(phone_set)
    p = np.full((len(indices), n), (1.0 - peak) / (n - 1))
    for row, idx in enumerate(indices):
        p[row, idx] = peak
    times = np.arange(len(indices)) * hop_s
    return Posteriorgram(frame_times_s=times, p=p, phone_set=phone_set)


class TestPhoneSet:
    def test_default_set_shape(self):
        ps = default_phone_set()
        assert len(ps) == 40
        assert "sil" in ps.phones
        assert ps.category_of["sil"] == "silence"
        counts = {c: 0 for c in CATEGORIES}
        for phone in ps.phones:
            counts[ps.category_of[phone]] += 1
        assert counts["vowel"] == 15
        assert counts["plosive"] == 6
        assert counts["fricative"] == 9
        assert counts["affricate"] == 2
        assert counts["nasal"] == 3
        assert counts["approximant"] == 4
        assert counts["silence"] == 1

    def test_reduced_set_without_affricates_allowed(self, mini_set):
        assert len(mini_set) == 6

    def test_missing_sil_rejected(self):
        with pytest.raises(ValueError):
            PhoneSet(phones=("a", "t"), category_of={"a": "vowel", "t": "plosive"})

    def test_duplicate_phone_rejected(self):
        with pytest.raises(ValueError):
            parse_phone_table("a\tvowel\na\tvowel\nsil\tsilence")

    def test_empty_required_category_rejected(self):
        table = "a\tvowel\nsil\tsilence"
        with pytest.raises(ValueError):
            parse_phone_table(table)


class TestForward:
    def test_uniform_test_model(self, mini_set):
        class Uniform:
            phone_set = mini_set

            def posterior_rows(self, rows):
                n = len(self.phone_set)
                return np.full((rows.shape[0], n), 1.0 / n)

        fm = FeatureMatrix(mfcc=np.zeros((5, 13)), log_energy=np.zeros(5))
        pg = forward(Uniform(), fm)
        assert np.allclose(pg.p, 1.0 / 6)

    def test_one_hot_test_model(self, mini_set):
        class OneHot:
            phone_set = mini_set

            def posterior_rows(self, rows):
                # keyed on the injected tag in column 0
                out = np.zeros((rows.shape[0], len(self.phone_set)))
                for i, row in enumerate(rows):
                    out[i, int(row[0])] = 1.0
                return out

        tags = np.array([0, 2, 5, 1])
        fm = FeatureMatrix(
            mfcc=np.hstack([tags[:, None], np.zeros((4, 12))]),
            log_energy=np.zeros(4),
        )
        pg = forward(OneHot(), fm)
        assert np.array_equal(np.argmax(pg.p, axis=1), tags)
        assert np.all(np.max(pg.p, axis=1) == 1.0)

    def test_dimension_mismatch(self, mini_set, rng):
        rows = rng.normal(size=(40, 4))
        labels = ["a"] * 20 + ["s"] * 20
        model = train_reference_model(rows, labels, mini_set)
        fm = FeatureMatrix(mfcc=np.zeros((3, 13)), log_energy=np.zeros(3))
        with pytest.raises(DimensionMismatch):
            forward(model, fm)


class TestTrainReferenceModel:
    def test_separated_phones_held_out_accuracy(self, mini_set, rng):
        # means 10 sigma apart -> held-out accuracy 100 %
        a_train = rng.normal(0.0, 1.0, (100, 3))
        s_train = rng.normal(10.0, 1.0, (100, 3))
        rows = np.vstack([a_train, s_train])
        labels = ["a"] * 100 + ["s"] * 100
        model = train_reference_model(rows, labels, mini_set)

        a_test = rng.normal(0.0, 1.0, (200, 3))
        s_test = rng.normal(10.0, 1.0, (200, 3))
        p = model.posterior_rows(np.vstack([a_test, s_test]))
        predicted = np.argmax(p, axis=1)
        expected = np.array([mini_set.index("a")] * 200 + [mini_set.index("s")] * 200)
        assert np.array_equal(predicted, expected)

    def test_single_phone_concentrates_vs_background(self, mini_set, rng):
        rows = rng.normal(3.0, 0.5, (50, 2))
        model = train_reference_model(rows, ["n"] * 50, mini_set)
        # queries from the core of the trained class beat the background
        p = model.posterior_rows(rng.normal(3.0, 0.25, (20, 2)))
        n_idx = mini_set.index("n")
        assert np.all(np.argmax(p, axis=1) == n_idx)
        assert np.all(p[:, n_idx] > 1.0 / len(mini_set))

    def test_variance_floor(self, mini_set):
        rows = np.zeros((30, 2))
        rows[:, 1] = np.linspace(0, 1, 30)
        model = train_reference_model(rows, ["a"] * 30, mini_set)
        a_idx = mini_set.index("a")
        assert model.variances[a_idx, 0] == 1e-4
        p = model.posterior_rows(np.array([[0.0, 0.5]]))
        assert np.all(np.isfinite(p))

    def test_insufficient_data(self, mini_set, rng):
        rows = rng.normal(size=(9, 2))
        with pytest.raises(InsufficientData):
            train_reference_model(rows, ["a"] * 9, mini_set)

    def test_sub_threshold_phone_folds_into_background(self, mini_set, rng):
        rows = np.vstack([rng.normal(0, 1, (50, 2)), rng.normal(5, 1, (5, 2))])
        labels = ["a"] * 50 + ["s"] * 5
        model = train_reference_model(rows, labels, mini_set)
        assert model.present[mini_set.index("a")]
        assert not model.present[mini_set.index("s")]

    def test_posteriors_match_likelihood_oracle(self, mini_set, rng):
        rows = np.vstack([rng.normal(0, 1, (60, 3)), rng.normal(4, 2, (60, 3))])
        labels = ["a"] * 60 + ["t"] * 60
        model = train_reference_model(rows, labels, mini_set)
        queries = rng.normal(2, 2, (25, 3))
        p = model.posterior_rows(queries)
        for i, row in enumerate(queries):
            likelihoods = []
            for j in range(len(mini_set)):
                if model.present[j]:
                    mean, var = model.means[j], model.variances[j]
                else:
                    mean, var = model.background_mean, model.background_var
                likelihoods.append(gaussian_oracle(row, mean, var))
            expected = np.array(likelihoods) / np.sum(likelihoods)
            assert np.max(np.abs(p[i] - expected)) < 1e-6

    def test_model_serialization_roundtrip(self, mini_set, rng):
        rows = rng.normal(size=(40, 3))
        labels = ["a"] * 20 + ["l"] * 20
        model = train_reference_model(rows, labels, mini_set)
        loaded = load_model(save_model(model))
        assert loaded.phone_set.phones == model.phone_set.phones
        assert np.array_equal(loaded.means, model.means)
        assert np.array_equal(loaded.variances, model.variances)
        assert np.array_equal(loaded.present, model.present)
        queries = rng.normal(size=(10, 3))
        assert np.array_equal(
            loaded.posterior_rows(queries), model.posterior_rows(queries)
        )


class TestCategoryPosteriors:
    def test_one_hot_fricative(self, mini_set):
        pg = posteriors_from_indices([mini_set.index("s")], mini_set, peak=1.0 - 1e-12)
        cats = category_posteriors(pg)
        assert cats[0, CATEGORIES.index("fricative")] == pytest.approx(1.0)

    def test_uniform_mass_by_member_count(self):
        ps = default_phone_set()
        pg = uniform_posteriors(np.arange(3) * 0.01, ps)
        cats = category_posteriors(pg)
        assert cats[0, CATEGORIES.index("vowel")] == pytest.approx(15 / 40)
        assert cats[0, CATEGORIES.index("plosive")] == pytest.approx(6 / 40)
        assert cats[0, CATEGORIES.index("silence")] == pytest.approx(1 / 40)

    def test_mass_conservation(self, mini_set, rng):
        raw = rng.uniform(0.01, 1.0, (30, 6))
        p = raw / raw.sum(axis=1, keepdims=True)
        pg = Posteriorgram(np.arange(30) * 0.01, p, mini_set)
        cats = category_posteriors(pg)
        assert np.allclose(cats.sum(axis=1), 1.0, atol=1e-6)

    def test_linearity_under_convex_mixing(self, mini_set, rng):
        raw = rng.uniform(0.01, 1.0, (2, 6))
        p, q = raw / raw.sum(axis=1, keepdims=True)
        lam = 0.3
        mixed = Posteriorgram(np.zeros(1), (lam * p + (1 - lam) * q)[None, :], mini_set)
        separate = lam * category_posteriors(
            Posteriorgram(np.zeros(1), p[None, :], mini_set)
        ) + (1 - lam) * category_posteriors(
            Posteriorgram(np.zeros(1), q[None, :], mini_set)
        )
        assert np.allclose(category_posteriors(mixed), separate, atol=1e-9)


class TestDecodePhones:
    def test_uniform_run_single_segment(self, mini_set):
        a = mini_set.index("a")
        pg = posteriors_from_indices([a] * 10, mini_set)
        segments = decode_phones(pg)
        assert len(segments) == 1
        assert segments[0].phone == "a"
        assert segments[0].start_s == pytest.approx(0.0)
        assert segments[0].end_s == pytest.approx(0.10)

    def test_single_frame_island_absorbed(self, mini_set):
        a, t = mini_set.index("a"), mini_set.index("t")
        pg = posteriors_from_indices([a] * 5 + [t] + [a] * 5, mini_set)
        segments = decode_phones(pg)
        assert len(segments) == 1
        assert segments[0].phone == "a"
        assert segments[0].end_s == pytest.approx(0.11)

    def test_duration_conserved_on_random_sequences(self, mini_set, rng):
        for _ in range(200):
            n = int(rng.integers(1, 60))
            raw = rng.uniform(0.01, 1.0, (n, 6))
            p = raw / raw.sum(axis=1, keepdims=True)
            pg = Posteriorgram(np.arange(n) * 0.01, p, mini_set)
            segments = decode_phones(pg)
            total = sum(s.duration_s for s in segments)
            assert total == pytest.approx(n * 0.010)
            for left, right in zip(segments, segments[1:]):
                assert left.phone != right.phone
                assert left.end_s == pytest.approx(right.start_s)
            if len(segments) > 1:
                for s in segments:
                    assert s.duration_s >= 0.030 - 1e-9

    def test_short_clip_exception(self, mini_set):
        a, t = mini_set.index("a"), mini_set.index("t")
        pg = posteriors_from_indices([a, t], mini_set)
        segments = decode_phones(pg)
        assert len(segments) == 1
        assert segments[0].duration_s == pytest.approx(0.020)

    def test_absorption_prefers_higher_mean_posterior(self, mini_set):
        a, t, s = mini_set.index("a"), mini_set.index("t"), mini_set.index("s")
        n = len(mini_set)
        rows = []
        for idx, peak in [(a, 0.9)] * 3 + [(t, 0.6)] * 2 + [(s, 0.8)] * 3:
            row = np.full(n, 0.0)
            row[idx] = peak
            rest = (1.0 - peak) / (n - 1)
            row[np.arange(n) != idx] = rest
            rows.append(row)
        pg = Posteriorgram(np.arange(8) * 0.01, np.array(rows), mini_set)
        segments = decode_phones(pg)
        # the 2-frame t run joins the a side (mean 0.9 beats 0.8)
        assert [s_.phone for s_ in segments] == ["a", "s"]
        assert segments[0].end_s == pytest.approx(0.05)
        assert segments[1].start_s == pytest.approx(0.05)

    def test_empty_input(self, mini_set):
        pg = Posteriorgram(np.array([]), np.zeros((0, 6)), mini_set)
        assert decode_phones(pg) == []

    def test_offset_times_respected(self, mini_set):
        a = mini_set.index("a")
        times = 2.5 + np.arange(5) * 0.01
        pg = posteriors_from_indices([a] * 5, mini_set)
        pg = Posteriorgram(times, pg.p, mini_set)
        (seg,) = decode_phones(pg)
        assert seg.start_s == pytest.approx(2.5)
        assert seg.end_s == pytest.approx(2.55)
