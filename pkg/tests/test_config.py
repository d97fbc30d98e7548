import pytest

from ifsdf.config import RunConfig, load_config, parse_pairs
from ifsdf.geom import InputError


def test_defaults_round_trip(tmp_path):
    cfg = RunConfig()
    (tmp_path / "c.txt").write_text(cfg.to_text())
    assert load_config(tmp_path / "c.txt") == cfg


def test_parse_types(tmp_path):
    (tmp_path / "c.txt").write_text(
        "# comment\nsigma_n_deg = 20\nconstraint=pull\nk_filter=8\nlayer_widths=32,32\n"
        "deterministic=false\nadam_betas=0.8,0.99\n")
    cfg = load_config(tmp_path / "c.txt")
    assert cfg.filter.sigma_n_deg == 20.0 and cfg.filter.constraint == "pull" and cfg.filter.k_filter == 8
    assert cfg.train.layer_widths == (32, 32) and cfg.train.deterministic is False
    assert cfg.train.adam_betas == (0.8, 0.99)


def test_overrides_win(tmp_path):
    (tmp_path / "c.txt").write_text("seed=3\n")
    assert load_config(tmp_path / "c.txt", seed=7).train.seed == 7
    assert load_config(tmp_path / "c.txt", seed=None).train.seed == 3


@pytest.mark.parametrize("text", ["alpha3=-1\n", "nonsense=1\n", "k_filter=two\n", "just words\n",
                                  "alpha1=nan\n", "sigma_p_policy=median\n", "learning_rate=0\n"])
def test_bad_configs_rejected(tmp_path, text):
    (tmp_path / "c.txt").write_text(text)
    with pytest.raises(InputError):
        load_config(tmp_path / "c.txt")


def test_missing_file():
    with pytest.raises(InputError):
        load_config("/nonexistent/cfg.txt")


def test_parse_pairs_line_numbers():
    with pytest.raises(InputError, match=":2:"):
        parse_pairs(["seed=1", "bogus=2"], "cfg")
