import pytest

from ces2gad.config import RunConfig, parse_pairs
from ces2gad.exceptions import ConfigError


def test_defaults_are_valid():
    cfg = RunConfig()
    assert cfg.k_se == 8 and cfg.d_z == 32 and cfg.h_g == 32 and cfg.nonedge_per_node == 5
    assert cfg.layers == 2 and cfg.hidden == 64 and cfg.alpha == 1.0
    assert cfg.lr == 0.01 and cfg.epochs == 200 and cfg.weight_decay == 5e-4
    assert cfg.split_ratios == (0.4, 0.2, 0.4)
    assert cfg.sigma == 2.0 and cfg.rewire == 2


def test_text_round_trip():
    cfg = RunConfig(seed=3, alpha_grid=(0.5, 1.0), residual=False, dataset="data/x")
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_overrides_coerce_types():
    cfg = RunConfig().with_overrides(
        {"epochs": "7", "lr": "0.5", "residual": "no", "ratio_grid": "0,0.1", "branches": "low"}
    )
    assert cfg.epochs == 7 and cfg.lr == 0.5 and cfg.residual is False
    assert cfg.ratio_grid == (0.0, 0.1) and cfg.branches == "low"


def test_comments_and_blank_lines():
    cfg = RunConfig.from_text("# a comment\n\nseed = 4\n")
    assert cfg.seed == 4


@pytest.mark.parametrize(
    "text",
    [
        "no_such_key=1\n",
        "epochs=many\n",
        "residual=maybe\n",
        "justtext\n",
        "alpha=3.0\n",
        "alpha_grid=0.5,2.5\n",
        "split_ratios=0.5,0.5,0.5\n",
        "separation=magic\n",
        "layers=0\n",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "none.txt")


def test_parse_pairs_reports_line():
    with pytest.raises(ConfigError, match=":2:"):
        parse_pairs(["a=1", "oops"], "cfg")
