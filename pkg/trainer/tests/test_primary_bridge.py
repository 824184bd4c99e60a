import shutil

import pytest

from toytrainer.data import read_index
from toytrainer.primary import evaluate_depth_shift, evaluate_predictions, parse_aggregate


def test_parse_aggregate_line():
    text = "000001 d1=0.5 d2=0.6\naggregate d1=0.9123 d2=0.9456 rmse=1.2500 n=100\n"
    agg = parse_aggregate(text)
    assert agg == {"d1": 0.9123, "d2": 0.9456, "rmse": 1.25, "n": 100.0}


def test_parse_aggregate_missing_line():
    with pytest.raises(RuntimeError, match="no aggregate"):
        parse_aggregate("nothing here")


def test_evaluate_bridge_with_perfect_predictions(tiny_clean, tmp_path):
    root, rows = read_index(tiny_clean)
    preds = tmp_path / "preds"
    preds.mkdir()
    for sid, _, depth, _ in rows:
        shutil.copyfile(root / depth, preds / f"{sid}.png")
    agg = evaluate_predictions(preds, tiny_clean, region=True)
    assert agg["d1"] == 1.0
    assert agg["region_d1"] == 1.0
    rd = evaluate_depth_shift(preds, preds, tiny_clean)
    assert rd == 0.0
