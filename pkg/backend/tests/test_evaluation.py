# backend/tests/test_evaluation.py
import os
import sys

# Add project root to sys.path
TESTS_DIR = os.path.dirname(__file__)
PROJECT_ROOT = os.path.abspath(os.path.join(TESTS_DIR, "..", ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import itertools

import numpy as np
import pytest
from scipy.stats import mannwhitneyu, rankdata

from backend.evaluation.mcd import MCD_SCALE, McdReport, align_lengths, mcd, waveform_mcd
from backend.evaluation.mushra import (
    load_scores,
    pairwise_tests,
    summarize,
    write_pairwise,
    write_summary,
)
from backend.evaluation.ranksum import ranksum_test
from backend.src.core.errors import FormatError, SignalError
from backend.src.utils.data_utils import read_tsv
from conftest import make_vowel


# ---------- MCD ----------

def test_mcd_of_identical_matrices_is_zero():
    x = np.random.default_rng(0).standard_normal((10, 25))
    assert mcd(x, x) == 0.0


def test_mcd_scale_and_energy_exclusion():
    ref = np.zeros((4, 25))
    test = ref.copy()
    test[:, 0] = 100.0
    assert mcd(ref, test) == 0.0
    test[:, 3] = 1.0
    assert mcd(ref, test) == pytest.approx(10.0 / np.log(10.0) * np.sqrt(2.0))
    assert MCD_SCALE == pytest.approx(6.1416, abs=1e-4)


def test_mcd_requires_aligned_inputs():
    with pytest.raises(SignalError) as exc:
        mcd(np.zeros((4, 25)), np.zeros((5, 25)))
    assert exc.value.code == "length-mismatch"
    a, b = align_lengths(np.zeros((4, 25)), np.zeros((5, 25)))
    assert a.shape == b.shape == (4, 25)


def test_waveform_mcd_self_is_zero():
    wav = make_vowel(seconds=0.3)
    value, frames = waveform_mcd(wav, wav)
    assert value == 0.0
    assert frames == len(wav) // 270 + 1


def test_mcd_report(tmp_path):
    report = McdReport()
    report.add("b", 4.0, 10)
    report.add("a", 2.0, 30)
    assert report.mean == pytest.approx(3.0)
    assert report.total_frames == 40
    rows = read_tsv(report.write(tmp_path / "mcd.tsv"))
    assert [r["utterance"] for r in rows] == ["a", "b", "mean"]
    assert float(rows[-1]["mcd_db"]) == pytest.approx(3.0)
    with pytest.raises(SignalError):
        report.add("c", -1.0, 3)


# ---------- Rank-sum ----------

def _enumerated_p(a, b) -> float:
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    n1 = len(a)
    centre = n1 * ranks.sum() / ranks.size
    observed = abs(ranks[:n1].sum() - centre)
    hits = total = 0
    for idx in itertools.combinations(range(ranks.size), n1):
        total += 1
        hits += abs(ranks[list(idx)].sum() - centre) >= observed - 1e-9
    return hits / total


def test_ranksum_separated_samples():
    result = ranksum_test([1, 2, 3], [4, 5, 6])
    assert result.u == 0.0
    assert result.method == "exact"
    assert result.p_value == pytest.approx(0.1)
    assert not result.significant


def test_ranksum_exact_matches_scipy_without_ties():
    rng = np.random.default_rng(0)
    a, b = rng.normal(0, 1, 5), rng.normal(1, 1, 6)
    ours = ranksum_test(a, b)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="exact")
    assert ours.u == pytest.approx(ref.statistic)
    assert ours.p_value == pytest.approx(ref.pvalue)


def test_ranksum_exact_with_ties_matches_enumeration():
    a = np.array([1.0, 2.0, 2.0, 3.0])
    b = np.array([2.0, 3.0, 3.0, 4.0, 5.0])
    assert ranksum_test(a, b).p_value == pytest.approx(_enumerated_p(a, b))


def test_ranksum_normal_matches_scipy():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 20, 15).astype(float)
    b = rng.integers(5, 25, 18).astype(float)
    ours = ranksum_test(a, b)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert ours.method == "normal"
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_ranksum_two_against_two():
    result = ranksum_test([1, 2], [3, 4])
    assert result.method == "exact"
    assert result.p_value == pytest.approx(1.0 / 3.0)


@pytest.mark.parametrize("n1", range(1, 8))
def test_ranksum_exact_matches_enumeration_for_small_samples(n1):
    rng = np.random.default_rng(n1)
    for n2 in range(1, 8):
        a = rng.integers(0, 6, n1).astype(float)
        b = rng.integers(2, 8, n2).astype(float)
        result = ranksum_test(a, b)
        assert result.method == "exact"
        assert result.p_value == pytest.approx(_enumerated_p(a, b), abs=1e-12), (n1, n2)


def test_ranksum_large_first_sample_uses_the_small_one():
    rng = np.random.default_rng(7)
    big = rng.integers(0, 101, 5000).astype(float)
    small = rng.integers(0, 101, 3).astype(float)
    forward = ranksum_test(big, small)
    backward = ranksum_test(small, big)
    assert forward.method == backward.method == "exact"
    assert forward.p_value == pytest.approx(backward.p_value, rel=1e-9)
    assert forward.u + backward.u == pytest.approx(5000 * 3)


@pytest.mark.parametrize("n1, n2", [(8, 8), (8, 10), (10, 9), (10, 10)])
def test_ranksum_normal_close_to_exact(n1, n2):
    rng = np.random.default_rng(n1 * 100 + n2)
    for _ in range(5):
        a, b = rng.normal(0.0, 1.0, n1), rng.normal(0.7, 1.0, n2)
        exact = ranksum_test(a, b, exact=True).p_value
        normal = ranksum_test(a, b, exact=False).p_value
        assert abs(exact - normal) <= 0.02


def test_ranksum_forced_method_and_identical_samples():
    assert ranksum_test([3, 1, 2], [5, 4, 6], exact=False).method == "normal"
    result = ranksum_test(np.full(10, 50.0), np.full(12, 50.0))
    assert result.p_value == 1.0


def test_ranksum_empty_sample():
    with pytest.raises(SignalError) as exc:
        ranksum_test([], [1.0])
    assert exc.value.code == "empty-sample"


# ---------- MUSHRA ----------

def _write_scores(path, rows, header="listener,system,sentence,score,speaker"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def _score_rows():
    rows = []
    for listener in range(10):
        rows.append(f"L{listener},reference,s1,{90 + listener % 5},spk1")
        rows.append(f"L{listener},proposed,s1,{60 + listener},spk1")
        rows.append(f"L{listener},anchor,s1,{10 + listener % 3},spk2")
    return rows


def test_mushra_summary_and_pairs(tmp_path):
    ratings = load_scores(_write_scores(tmp_path / "scores.csv", _score_rows()))
    assert len(ratings) == 30

    summaries = {s.system: s for s in summarize(ratings)}
    assert set(summaries) == {"anchor", "proposed", "reference"}
    proposed = summaries["proposed"]
    assert proposed.n == 10
    assert proposed.mean == pytest.approx(64.5)
    assert proposed.ci_low < proposed.mean < proposed.ci_high

    pairs = pairwise_tests(ratings)
    assert [(p.system_a, p.system_b) for p in pairs] == [
        ("anchor", "proposed"), ("anchor", "reference"), ("proposed", "reference"),
    ]
    assert all(p.result.significant for p in pairs)
    assert all(p.result.method == "normal" for p in pairs)

    summary_rows = read_tsv(write_summary(list(summaries.values()), tmp_path / "summary.tsv"))
    assert {r["system"] for r in summary_rows} == set(summaries)
    pair_rows = read_tsv(write_pairwise(pairs, tmp_path / "pairs.tsv"))
    assert pair_rows[0]["significant"] == "1"


def test_mushra_speaker_filter(tmp_path):
    path = _write_scores(tmp_path / "scores.csv", _score_rows())
    ratings = load_scores(path, speaker="spk2")
    assert {r.system for r in ratings} == {"anchor"}
    with pytest.raises(FormatError) as exc:
        load_scores(path, speaker="nobody")
    assert exc.value.code == "invalid-scores"


@pytest.mark.parametrize("bad", ["L1,a,s1,101", "L1,a,s1,abc", "L1,a,s1,55.5"])
def test_mushra_rejects_bad_scores(tmp_path, bad):
    path = _write_scores(tmp_path / "scores.csv", ["L0,a,s1,50", bad], header="listener,system,sentence,score")
    with pytest.raises(FormatError) as exc:
        load_scores(path)
    assert exc.value.code == "invalid-scores"


def test_mushra_missing_column(tmp_path):
    path = _write_scores(tmp_path / "scores.csv", ["L0,a,50"], header="listener,system,score")
    with pytest.raises(FormatError) as exc:
        load_scores(path)
    assert exc.value.code == "invalid-scores"
