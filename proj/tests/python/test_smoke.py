"""Smoke tests for the python bindings: each main operation is exercised once."""

import json
import math

import pytest

import cotcheck as cc


def _record_line(record_id, grade, cot, confidence=80.0):
    return json.dumps(
        {
            "record_id": record_id,
            "benchmark": "synth",
            "model": "toy",
            "cot": cot,
            "final_answer": "42",
            "confidence_pct": confidence,
            "grade": grade,
        }
    )


@pytest.fixture()
def corpus(tmp_path):
    lines = []
    for i in range(40):
        grade = "correct" if i % 2 == 0 else "incorrect"
        cot = "We compute the value. It might be hard." if grade == "incorrect" else (
            "We compute the value. The answer is clear."
        )
        lines.append(_record_line(f"r{i}", grade, cot, confidence=min(100.0, 50.0 + i)))
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return cc.load_corpus(str(path)).corpus


def test_tokenize_and_lemmatize():
    assert cc.tokenize("Don't guess!") == ["don", "t", "guess"]
    assert cc.lemmatize("positions") == "position"
    assert cc.cot_length("a b c") == 3
    assert len(cc.split_sentences("A. B? C!")) == 3


def test_volatility_and_hedging():
    assert cc.volatility(cc.SentimentTriple(0.5, -0.3, 1)) == pytest.approx(0.8)
    assert cc.hedging_rate("It seems that x is 2. Therefore x is 2.") == pytest.approx(0.5)


def test_corpus_loading_and_groups(corpus):
    assert len(corpus) == 40
    assert corpus.accuracy() == pytest.approx(0.5)
    rows = cc.group_accuracy(corpus, "benchmark")
    assert rows == [("synth", 0.5, 40)]


def test_metrics_roundtrip():
    assert cc.mcc(cc.ConfusionMatrix(40, 30, 24, 46)) == pytest.approx(0.229, abs=5e-4)
    auc, curve = cc.roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert auc == pytest.approx(1.0)
    assert curve[0] == (0.0, 0.0) and curve[-1] == (1.0, 1.0)
    kappa, agreement = cc.cohen_kappa([1, 0, 1], [1, 0, 1])
    assert kappa == pytest.approx(1.0) and agreement == pytest.approx(1.0)
    err, bins = cc.calibration_error([(100.0, 1)] * 5)
    assert err == pytest.approx(0.0)
    assert len(bins) == 10


def test_lexicon_and_heuristics(corpus):
    assert cc.relative_accuracy("might", corpus) == pytest.approx(0.0)
    entries = cc.build_lexicon([("synth", corpus)], min_occurrences=2)
    tokens = {e["token"] for e in entries}
    assert "value" in tokens
    assert cc.harmful_word_rule("I will just guess here") == 0
    assert cc.harmful_word_rule("A clean proof") == 1
    assert cc.confidence_coinflip("any", 100.0, seed=7) == 1
    assert cc.confidence_coinflip("any", 0.0, seed=7) == 0


def test_classifier_learns_a_planted_flag(tmp_path):
    rows, labels = [], []
    for i in range(200):
        y = i % 2
        rows.append([float(y), 0.25])
        labels.append(y)
    config = cc.TrainConfig()
    config.epochs = 30
    model = cc.train_mlp(rows, labels, config, seed=0)
    assert model.feature_dim() == 2
    assert cc.predict_label(model, [1.0, 0.25]) == 1
    assert cc.predict_label(model, [0.0, 0.25]) == 0
    assert 0.0 < cc.forward(model, [1.0, 0.25]) < 1.0

    path = tmp_path / "model.bin"
    cc.save_model(model, str(path))
    loaded = cc.load_model(str(path))
    assert cc.forward(loaded, [1.0, 0.25]) == cc.forward(model, [1.0, 0.25])


def test_split_is_balanced_and_seeded(corpus):
    plan = cc.split_train_balanced_test(corpus, 0.8, seed=3)
    assert len(plan.train_ids) == 32
    test = cc.subset(corpus, plan.test_ids)
    grades = [r.grade for r in test.records]
    assert grades.count(cc.Grade.correct) == grades.count(cc.Grade.incorrect)
    again = cc.split_train_balanced_test(corpus, 0.8, seed=3)
    assert again.train_ids == plan.train_ids


def test_sentiment_prompt_roundtrip():
    prompt = cc.build_sentiment_prompt("Some chain of thought.")
    assert "Most positive emotion Score:" in prompt
    triple = cc.SentimentTriple(0.4, -0.2, -1)
    parsed = cc.parse_sentiment_response(cc.format_sentiment_trailer(triple))
    assert parsed.most_positive == pytest.approx(0.4)
    assert parsed.direction == -1
    with pytest.raises(cc.DataError):
        cc.parse_sentiment_response("Direction: 2")


def test_pipeline_runs_end_to_end(tmp_path):
    lines = []
    for i in range(120):
        grade = "correct" if i % 2 == 0 else "incorrect"
        cot = (
            "We might guess badly here. It is hard."
            if grade == "incorrect"
            else "We compute the value directly. Simple."
        )
        lines.append(_record_line(f"r{i}", grade, cot))
    corpus_path = tmp_path / "c.jsonl"
    corpus_path.write_text("\n".join(lines) + "\n")
    config = {
        "corpora": {"only": {"path": str(corpus_path)}},
        "features": {"sets": [["words"]], "word_list": ["guess", "hard", "might"]},
        "lexicon": {"min_occurrences": 5, "resamples": 20},
        "classifier": {"epochs": 5, "seeds": [0, 1]},
        "heuristics": {"coinflip_seeds": 5},
        "output": {"dir": str(tmp_path / "out")},
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = cc.run_pipeline(str(cfg_path))
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["tool"] == "cotcheck"
    assert (tmp_path / "out" / "classifier_results.csv").exists()
    assert out_dir == str(tmp_path / "out")
