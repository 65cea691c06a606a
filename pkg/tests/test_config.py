import math

import pytest

from slestates.config import ConfigError, RunConfig, parse_config


def test_minimal_minkowski():
    cfg = parse_config("background = minkowski\nm0 = 1\n")
    assert cfg.background_kind == "minkowski" and cfg.background_m0 == 1.0
    assert cfg.window_eta1 == -0.3 and cfg.seed == 42
    assert cfg.build_background().name == "minkowski"


def test_comments_blank_lines_and_types():
    cfg = parse_config("""
        # a comment
        background.kind = power_law   # trailing comment
        background.nu = 0.5
        p.count = 7
        p.spacing = linear
        verify.break_wronskian = true
        solve.tau0 = -0.1
    """)
    assert cfg.p_count == 7 and isinstance(cfg.p_count, int)
    assert cfg.verify_break_wronskian is True
    assert cfg.tau0 == -0.1
    assert parse_config("").tau0 is None


def test_round_trip():
    cfg = parse_config("background = preinflation\nbackground.H = 2.0\nwindow.eta1 = -0.1\n"
                       "window.eta2 = 0.2\np.min = 0.1\ngd.order = 3\n")
    again = parse_config(cfg.canonical())
    assert again == cfg
    assert again.canonical() == cfg.canonical()


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 2") as exc:
        parse_config("background = minkowski\nwindow.height = 3\n")
    assert exc.value.line == 2 and exc.value.column == 1


def test_malformed_lines():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("just text\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="p.count") as exc:
        parse_config("\n\np.count = many\n")
    assert exc.value.line == 3
    with pytest.raises(ConfigError, match="missing value"):
        parse_config("tol =\n")


@pytest.mark.parametrize("text, field", [
    ("p.min = -1", "p.min"),
    ("p.max = 0.001", "p.max"),
    ("tol = nan", "tol"),
    ("background.kind = anti_de_sitter", "background.kind"),
    ("window.eta1 = 0.6", "window.eta2"),
    ("solve.route = sideways", "solve.route"),
    ("background = tabulated", "background.table"),
    ("background = power_law\nwindow.eta1 = -0.7", "window.eta1"),
])
def test_validation_names_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field
    assert field in str(exc.value)


def test_preinflation_window_bound():
    with pytest.raises(ConfigError, match="1/H") as exc:
        parse_config("background = preinflation\nwindow.eta2 = 1.2\n")
    assert exc.value.field == "window.eta2"
    with pytest.raises(ConfigError, match="-1/\\(2H\\)"):
        parse_config("background = preinflation\nwindow.eta1 = -0.4999\n")


def test_momenta_and_scale():
    cfg = parse_config("background = desitter\nbackground.H = 2\nwindow.eta2 = 0.2\n"
                       "p.min = 1\np.max = 100\np.count = 3\n")
    assert cfg.momenta().tolist() == pytest.approx([1.0, 10.0, 100.0])
    assert cfg.scale == 2.0
    assert RunConfig().scale == 1.0
    assert math.isnan(RunConfig().solve_tau0)
