import numpy as np
import pytest

from kwspot.dtw import (
    KeywordTemplate,
    ScoreVector,
    SearchConfig,
    batch_score,
    dtw_align,
    frame_similarity,
    score_utterance,
    sweep_template,
    window_starts,
)
from kwspot.errors import DataError, ShapeError
from kwspot.features import FeatureSequence

from oracles import oracle_dtw_similarity, oracle_sweep


def seq(arr):
    return FeatureSequence(np.asarray(arr, dtype=np.float32), frame_rate=100.0)


def template(arr, kw=0, tid=0, spk="s"):
    return KeywordTemplate(seq(arr), keyword_id=kw, template_id=tid, speaker_id=spk)


class TestFrameSimilarity:
    def test_identical_vectors_score_exactly_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.normal(size=7)
            assert frame_similarity(x, x) == 1.0

    def test_orthogonal_vectors(self):
        assert frame_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.5, abs=1e-15)

    def test_opposite_vectors(self):
        x = np.array([0.3, -1.2, 0.8])
        assert frame_similarity(x, -x) == pytest.approx(0.0, abs=1e-12)

    def test_zero_norm_gives_half(self):
        assert frame_similarity(np.zeros(4), np.ones(4)) == 0.5
        assert frame_similarity(np.zeros(4), np.zeros(4)) == 1.0  # bitwise equal wins

    def test_symmetric_and_scale_invariant(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = rng.normal(size=5)
            y = rng.normal(size=5)
            a, b = rng.uniform(0.1, 10.0, size=2)
            assert frame_similarity(x, y) == pytest.approx(frame_similarity(y, x), abs=1e-12)
            assert frame_similarity(a * x, b * y) == pytest.approx(
                frame_similarity(x, y), abs=1e-12
            )

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            s = frame_similarity(rng.normal(size=6), rng.normal(size=6))
            assert 0.0 <= s <= 1.0


class TestDtwAlign:
    def test_self_alignment_is_exactly_one_with_diagonal_path(self):
        rng = np.random.default_rng(3)
        x = seq(rng.normal(size=(9, 4)))
        res = dtw_align(x, x)
        assert res.similarity == 1.0
        assert np.array_equal(res.path, np.stack([np.arange(9), np.arange(9)], axis=1))

    def test_matches_enumeration_oracle_on_random_grids(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            m, n = rng.integers(1, 7, size=2)
            d = int(rng.integers(1, 6))
            x = rng.normal(size=(m, d)).astype(np.float32)
            y = rng.normal(size=(n, d)).astype(np.float32)
            got = dtw_align(seq(x), seq(y)).similarity
            want = oracle_dtw_similarity(x, y)
            assert got == pytest.approx(want, abs=1e-9)

    def test_single_frames_reduce_to_frame_similarity(self):
        x = np.array([[1.0, 2.0, 0.5]], dtype=np.float32)
        y = np.array([[-0.3, 1.0, 2.0]], dtype=np.float32)
        res = dtw_align(seq(x), seq(y))
        assert res.similarity == pytest.approx(
            frame_similarity(x[0].astype(np.float64), y[0].astype(np.float64)), abs=1e-12
        )
        assert res.path.tolist() == [[0, 0]]

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            x = seq(rng.normal(size=(rng.integers(2, 8), 3)))
            y = seq(rng.normal(size=(rng.integers(2, 8), 3)))
            assert dtw_align(x, y).similarity == pytest.approx(
                dtw_align(y, x).similarity, abs=1e-12
            )

    def test_path_invariants(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            m, n = rng.integers(1, 9, size=2)
            x = seq(rng.normal(size=(m, 3)))
            y = seq(rng.normal(size=(n, 3)))
            path = dtw_align(x, y).path
            assert tuple(path[0]) == (0, 0)
            assert tuple(path[-1]) == (m - 1, n - 1)
            steps = set(map(tuple, np.diff(path, axis=0)))
            assert steps <= {(1, 0), (0, 1), (1, 1)}

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            dtw_align(seq(np.ones((3, 4))), seq(np.ones((3, 5))))

    def test_band_never_raises_similarity(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            x = seq(rng.normal(size=(6, 3)))
            y = seq(rng.normal(size=(8, 3)))
            free = dtw_align(x, y).similarity
            banded = dtw_align(x, y, band=1).similarity
            assert banded <= free + 1e-12


class TestSweep:
    def test_exact_match_single_window(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(12, 5)).astype(np.float32)
        assert sweep_template(template(x), seq(x)) == 1.0

    def test_template_planted_at_skip_aligned_offset(self):
        rng = np.random.default_rng(9)
        kw = rng.normal(size=(7, 4)).astype(np.float32)
        filler = rng.normal(size=(20, 4)).astype(np.float32)
        utt = np.concatenate([filler[:6], kw, filler[6:]], axis=0)
        assert sweep_template(template(kw), seq(utt), SearchConfig(frame_skip=3)) == 1.0

    def test_matches_bruteforce_sweep(self):
        rng = np.random.default_rng(10)
        for _ in range(15):
            m = int(rng.integers(2, 5))
            n = int(rng.integers(6, 11))
            t = rng.normal(size=(m, 3)).astype(np.float32)
            u = rng.normal(size=(n, 3)).astype(np.float32)
            got = sweep_template(template(t), seq(u), SearchConfig(frame_skip=3))
            want = oracle_sweep(t, u, skip=3)
            assert got == pytest.approx(want, abs=1e-9)

    def test_short_utterance_compared_whole(self):
        rng = np.random.default_rng(11)
        t = rng.normal(size=(9, 3)).astype(np.float32)
        u = rng.normal(size=(4, 3)).astype(np.float32)
        got = sweep_template(template(t), seq(u))
        assert got == pytest.approx(oracle_dtw_similarity(t, u), abs=1e-9)

    def test_window_starts(self):
        assert window_starts(10, 4, 3) == [0, 3, 6, 9]
        assert window_starts(3, 9, 3) == [0]
        assert window_starts(9, 9, 3) == [0, 3, 6]


class TestScoreUtterance:
    def test_template_equal_to_utterance(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(8, 4)).astype(np.float32)
        sv = score_utterance([template(x, kw=0)], seq(x))
        assert sv.scores.tolist() == [1.0]

    def test_max_over_templates_dominates(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=(8, 4)).astype(np.float32)
        junk = rng.normal(size=(5, 4)).astype(np.float32)
        sv = score_utterance([template(junk, kw=0, tid=0), template(x, kw=0, tid=1)], seq(x))
        assert sv.scores[0] == 1.0

    def test_missing_keyword_type_named(self):
        rng = np.random.default_rng(14)
        with pytest.raises(DataError, match="1"):
            score_utterance(
                [template(rng.normal(size=(4, 3)), kw=0)],
                seq(rng.normal(size=(6, 3))),
                n_keywords=2,
            )

    def test_adding_template_monotone(self):
        rng = np.random.default_rng(15)
        u = seq(rng.normal(size=(12, 3)))
        bank = [template(rng.normal(size=(4, 3)), kw=0, tid=0)]
        before = score_utterance(bank, u).scores[0]
        bank.append(template(rng.normal(size=(5, 3)), kw=0, tid=1))
        after = score_utterance(bank, u).scores[0]
        assert after >= before

    def test_scores_in_unit_interval(self):
        rng = np.random.default_rng(16)
        bank = [template(rng.normal(size=(4, 3)), kw=k, tid=j) for k in range(2) for j in range(2)]
        sv = score_utterance(bank, seq(rng.normal(size=(10, 3))))
        assert np.all(sv.scores >= 0.0) and np.all(sv.scores <= 1.0)


class TestBatchScore:
    def make_bank(self, rng, n_kw=2, n_tpl=2):
        return [
            template(rng.normal(size=(int(rng.integers(3, 7)), 3)), kw=k, tid=j)
            for k in range(n_kw)
            for j in range(n_tpl)
        ]

    def test_bit_identical_to_reference(self):
        rng = np.random.default_rng(17)
        bank = self.make_bank(rng)
        utts = [(f"u{i}", seq(rng.normal(size=(int(rng.integers(2, 15)), 3)))) for i in range(12)]
        got = batch_score(bank, utts)
        for (uid, feats), sv in zip(utts, got):
            ref = score_utterance(bank, feats, utterance_id=uid)
            assert sv.utterance_id == uid
            assert np.array_equal(sv.scores, ref.scores), f"mismatch on {uid}"

    def test_empty_collection(self):
        rng = np.random.default_rng(18)
        assert batch_score(self.make_bank(rng), []) == []

    def test_order_preserving_determinism(self):
        rng = np.random.default_rng(19)
        bank = self.make_bank(rng)
        utts = [(f"u{i}", seq(rng.normal(size=(10, 3)))) for i in range(6)]
        first = batch_score(bank, utts)
        second = batch_score(bank, list(reversed(utts)))
        for sv_f, sv_s in zip(first, reversed(second)):
            assert sv_f.utterance_id == sv_s.utterance_id
            assert np.array_equal(sv_f.scores, sv_s.scores)

    def test_error_carries_utterance_id(self):
        rng = np.random.default_rng(20)
        bank = self.make_bank(rng)
        utts = [("bad_utt", seq(rng.normal(size=(5, 7))))]  # wrong dim
        with pytest.raises(DataError, match="bad_utt"):
            batch_score(bank, utts)


def test_score_vector_rejects_out_of_range():
    with pytest.raises(DataError):
        ScoreVector(np.array([0.5, 1.2]))
