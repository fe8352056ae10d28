import pytest

from adscreen.config import ConfigError, RunConfig, load_config, parse_config_text


def test_parse_and_coerce():
    values = parse_config_text("# c\nseed = 7\ntfidf-use-stems = yes\ntemperature = 0.5  # warm\nspeakers = PAR,INV\n")
    assert values == {"seed": 7, "tfidf_use_stems": True, "temperature": 0.5, "speakers": "PAR,INV"}


@pytest.mark.parametrize("text", ["seed 7", "nope = 1", "seed = x", "strict = maybe"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_overrides_and_validation(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("seed = 3\nn_trees = 50\n")
    cfg = load_config(str(p), {"seed": 9, "strict": None})
    assert (cfg.seed, cfg.n_trees, cfg.strict) == (9, 50, False)
    assert cfg.speaker_codes == ("PAR",)
    fc = cfg.forest_config()
    assert fc.max_features is None and fc.max_depth is None and fc.n_trees == 50
    with pytest.raises(ConfigError):
        load_config(None, {"topic_mapping": "other"})
    with pytest.raises(ConfigError):
        load_config(None, {"keywords_path": str(tmp_path / "missing.json")})


def test_dumps_roundtrip():
    cfg = RunConfig(seed=4, bleu_smoothing=False)
    assert load_config(None, parse_config_text(cfg.dumps())) == cfg
