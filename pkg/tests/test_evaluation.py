import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from fogrl.corpus import Corpus
from fogrl.env import EnvConfig
from fogrl.evaluation import (EvalConfig, PredictionRecord, SubjectReport, average_ranks, coefficient_of_variation,
                              compute_metrics, correlations, eval_dependent, eval_loso, eval_subject_dependent,
                              read_report_csv, render_markdown, rollout, spearman_rho, split_episodes, ti_variance,
                              write_report_csv)
from fogrl.replay import PLACE, PerConfig, WAIT
from fogrl.trainer import TrainConfig
from oracles import average_ranks_by_hand, pearson

FAST = TrainConfig(total_episodes=30, batch_size=16, hidden=[8], target_sync_steps=20, epsilon_decay=0.9)


class ThresholdAgent:
    """Places once the remaining time drops to ``at`` seconds (never when None)."""

    def __init__(self, at):
        self.at = at
        self.env_config = EnvConfig()

    def act(self, obs):
        return PLACE if self.at is not None and obs[0] <= self.at else WAIT


def rec(tau=None, misplaced=False, placed=True, reward=150.0, sid=1):
    return PredictionRecord("x", sid, placed, misplaced, tau, reward)


def test_metrics_hand_oracle():
    r = compute_metrics([rec(5.0), rec(6.0), rec(7.0)], 1)
    assert r.mean_prediction_point_s == pytest.approx(6.0)
    assert r.std_prediction_point_s == pytest.approx(math.sqrt(2 / 3), abs=1e-12)
    assert r.std_prediction_point_s == pytest.approx(0.8165, abs=1e-4)
    assert (r.longest_horizon_s, r.shortest_horizon_s) == (7.0, 5.0)
    assert compute_metrics([rec(4.0)]).std_prediction_point_s == 0.0


def test_metrics_absent_values():
    r = compute_metrics([rec(None, placed=False, reward=-200.0), rec(None, misplaced=True, reward=-200.0)])
    assert r.mean_prediction_point_s is None and r.longest_horizon_s is None
    assert r.mean_reward == -200.0
    assert (r.misplaced, r.total, r.undecided_count) == (1, 2, 1)
    assert r.misplaced_ratio == "1:2"


def test_record_invariants():
    with pytest.raises(ValueError):
        PredictionRecord("x", 1, False, True, None, 0.0)
    with pytest.raises(ValueError):
        PredictionRecord("x", 1, True, True, 3.0, 0.0)


@given(st.lists(st.floats(0.25, 15.0), min_size=1, max_size=20), st.integers(0, 20))
def test_misplaced_record_only_touches_ratio(taus, pos):
    base = [rec(t) for t in taus]
    more = list(base)
    more.insert(pos % (len(base) + 1), rec(None, misplaced=True, reward=-200.0))
    a, b = compute_metrics(base), compute_metrics(more)
    for f in ("mean_prediction_point_s", "std_prediction_point_s", "longest_horizon_s", "shortest_horizon_s"):
        assert getattr(a, f) == getattr(b, f)
    assert (b.misplaced, b.total) == (a.misplaced + 1, a.total + 1)
    assert b.undecided_count == a.undecided_count


def test_rollouts(small_corpus):
    ep = small_corpus.episodes[1]
    s = small_corpus.series[ep.trial_id]
    r = rollout(ThresholdAgent(8.0), s, ep)
    assert r.placed and not r.misplaced and r.tau_at_place_s == 8.0
    assert r.reward == pytest.approx(150.0 + 0.1 * 28)
    r = rollout(ThresholdAgent(None), s, ep)
    assert r.undecided and r.tau_at_place_s is None
    r = rollout(ThresholdAgent(0.0), s, ep)  # observed tau bottoms out at 0 inside the freeze
    assert r.misplaced and r.reward < 0


def test_split_rule():
    train, test = split_episodes(list(range(12)), 0.8, seed=3)
    assert (len(train), len(test)) == (9, 3)
    assert sorted(train + test) == list(range(12))
    assert split_episodes(list(range(2)), 0.8)[1] != []


def test_dependent_skips_tiny_subject(small_corpus):
    one = Corpus(small_corpus.series, small_corpus.episodes[:1], small_corpus.minutes)
    rep, recs = eval_subject_dependent(one, 1, FAST, EnvConfig(), PerConfig())
    assert rep is None and recs == []


def test_loso_folds(small_corpus):
    reps, recs = eval_loso(small_corpus, FAST, EnvConfig(), PerConfig())
    assert [r.subject_id for r in reps] == [1, 2, 3]
    for r in reps:
        assert r.n_train_episodes == 8 and r.total == r.n_test_episodes == 4
        assert r.longest_horizon_s is None or r.longest_horizon_s <= 15.0
    assert len(recs) == 12
    again, _ = eval_loso(small_corpus, FAST, EnvConfig(), PerConfig(), subjects=[3, 1, 2])
    assert [vars(r) for r in again] == [vars(r) for r in reps]


def test_dependent_mode(small_corpus):
    reps, recs = eval_dependent(small_corpus, FAST, EnvConfig(), PerConfig(), EvalConfig(mode="dependent"))
    assert all(r.mode == "dependent" and r.n_train_episodes == 3 and r.total == 1 for r in reps)


def test_spearman_fixtures():
    x = [1, 2, 3, 4, 5]
    assert spearman_rho(x, [2, 4, 8, 16, 32]) == (1.0, 0.0)
    assert spearman_rho(x, [5, 4, 3, 2, 1])[0] == -1.0
    fx = [0.12, 0.45, 0.33, 0.91, 0.05, 0.62, 0.45, 0.78]
    fy = [3.1, 2.2, 5.0, 4.4, 1.0, 6.3, 2.9, 4.4]
    assert average_ranks(fx).tolist() == average_ranks_by_hand(fx)
    rho, p = spearman_rho(fx, fy)
    assert rho == pytest.approx(pearson(average_ranks_by_hand(fx), average_ranks_by_hand(fy)), abs=1e-9)
    ref = stats.spearmanr(fx, fy)
    assert p == pytest.approx(ref.pvalue, rel=1e-9)
    with pytest.raises(ValueError):
        spearman_rho([1, 2], [1, 2])


def test_cv_and_ti_variance():
    assert coefficient_of_variation([5, 5, 5]) == 0.0
    assert coefficient_of_variation([2.0, 6.0]) == 0.5
    v = np.array([1.5, 4.0, 2.5, 7.25, 3.0])
    mean = sum(v) / len(v)
    std = math.sqrt(sum((x - mean) ** 2 for x in v) / len(v))
    assert coefficient_of_variation(v) == pytest.approx(std / mean, abs=1e-12)
    assert coefficient_of_variation([]) is None
    assert ti_variance([2.0, 2.0, 2.0]) == 0.0
    assert ti_variance([1.0, 3.0]) == 1.0
    assert ti_variance(v) == pytest.approx(sum((x - mean) ** 2 for x in v) / len(v), abs=1e-12)


def test_correlations_need_three_subjects(small_corpus):
    reps = [SubjectReport(s, "loso", misplaced=s - 1, total=4) for s in (1, 2, 3)]
    rows = correlations(reps, small_corpus)
    assert {r["x"] for r in rows} == {"fog_density", "ti_variance"}
    assert correlations(reps[:2], small_corpus) == []


def test_report_csv_and_markdown(tmp_path):
    reps = [SubjectReport(3, "dependent", 100.0, 6.0, 1.0, 7.5, 4.0, 1, 9, 0, 30, 9, "f"),
            SubjectReport(5, "loso", None, None, None, None, None, 2, 2, 0, 40, 2, "g")]
    write_report_csv(reps, tmp_path / "r.csv")
    back = read_report_csv(tmp_path / "r.csv")
    assert [vars(r) for r in back] == [vars(r) for r in reps]
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header.endswith("misplaced_ratio")
    md = render_markdown(reps)
    assert "7.50 (7.89)" in md and "1:9 (1:9)" in md and "n/a (88.28)" in md
    assert "published 8.72 s" in md and "published 3.98 s" in md


def test_published_reference_is_self_consistent():
    from fogrl.reference import HEADLINE, REFERENCE
    for mode in ("loso", "dependent"):
        ref = REFERENCE[mode]
        assert max(ref["longest_horizon_s"].values()) == HEADLINE[mode]["max_horizon_s"]
        mean = np.mean(list(ref["mean_prediction_point_s"].values()))
        assert round(mean, 2) == HEADLINE[mode]["mean_horizon_s"]
