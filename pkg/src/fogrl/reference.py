"""Published per-subject results, shown next to pipeline output in report.md.

Keys: evaluation mode -> metric -> {subject_id: value}.  Ratios are
(misplaced, total) pairs.
"""

SUBJECTS = (1, 2, 3, 5, 6, 7, 8, 9)


def _row(*values):
    return dict(zip(SUBJECTS, values))


REFERENCE = {
    "dependent": {
        "mean_reward": _row(120.82, 82.80, 116.58, 119.57, 23.65, 65.39, 43.95, 36.00),
        "mean_prediction_point_s": _row(5.05, 3.91, 6.03, 5.29, 2.21, 3.55, 3.19, 2.63),
        "std_prediction_point_s": _row(1.25, 1.93, 1.42, 1.01, 1.87, 1.62, 0.76, 1.31),
        "longest_horizon_s": _row(6.87, 5.08, 7.89, 7.29, 5.74, 5.47, 7.26, 6.70),
        "shortest_horizon_s": _row(4.30, 1.56, 4.15, 4.01, 3.09, 1.17, 5.94, 3.35),
        "misplaced_ratio": _row((0, 4), (0, 5), (1, 9), (4, 12), (0, 2), (0, 5), (0, 3), (0, 5)),
        "undecided_count": _row(0, 0, 0, 0, 0, 0, 0, 0),
    },
    "loso": {
        "mean_reward": _row(116.26, 91.22, 81.00, 88.28, 112.16, 100.39, 16.65, 94.05),
        "mean_prediction_point_s": _row(5.64, 5.63, 5.38, 5.15, 5.04, 5.50, 3.49, 5.44),
        "std_prediction_point_s": _row(1.39, 1.31, 1.96, 1.67, 1.56, 1.63, 2.59, 1.12),
        "longest_horizon_s": _row(6.87, 8.7, 8.72, 8.47, 7.07, 7.81, 6.6, 6.7),
        "shortest_horizon_s": _row(1.62, 1.95, 3.32, 0.45, 1.33, 0.78, 0.66, 2.39),
        "misplaced_ratio": _row((2, 18), (4, 20), (8, 39), (18, 51), (1, 10), (1, 21), (0, 13), (0, 24)),
        "undecided_count": _row(0, 0, 1, 1, 0, 0, 3, 0),
    },
}

# Headline summaries: best longest horizon and mean of per-subject mean prediction points.
HEADLINE = {
    "loso": {"max_horizon_s": 8.72, "mean_horizon_s": 5.16},
    "dependent": {"max_horizon_s": 7.89, "mean_horizon_s": 3.98},
}

# Mean prediction horizons of comparison methods (seconds).
COMPARISON_MEANS = {
    "DMD threshold (supervised)": 6.13,
    "CNN-LSTM without 6 parameters, independent": 0.61,
    "CNN-LSTM without 6 parameters, dependent": 1.15,
    "CNN-LSTM with 6 parameters, independent": 0.97,
    "CNN-LSTM with 6 parameters, dependent": 2.77,
}

TOTAL_EPISODES = 307
