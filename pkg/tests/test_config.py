import pytest

from dcmm.config import (
    PARETO_GRID,
    UNIFORM_GRID,
    Exp1Config,
    Exp2Config,
    LfcConfig,
    RatesConfig,
    load_config,
    parse_config,
)
from dcmm.errors import ConfigError


class TestDefaults:
    def test_exp1_grid_by_profile(self):
        assert Exp1Config().grid == UNIFORM_GRID and Exp1Config().tag == "uniform"
        cfg = Exp1Config(degree_profile="pareto(10,0.3)")
        assert cfg.grid == PARETO_GRID and cfg.tag == "pareto"

    def test_exp2(self):
        cfg = Exp2Config()
        assert (cfg.n, cfg.norm, cfg.snr, cfg.replicates) == (2000, 26.0, 23.0, 20)

    def test_others(self):
        assert RatesConfig().points == 9
        assert LfcConfig().c0 == (0.4, 0.2, 0.1, 0.05)


class TestParse:
    def test_sections_and_types(self):
        cfgs = parse_config(
            "[exp1]\nn = 300\ngrid = 5, 6\noms_trim = yes\nmethods = MSL\n"
            "[lfc]\nc0 = 0.1,0.05\nseeds = 3\n")
        assert cfgs["exp1"].n == 300 and cfgs["exp1"].grid == (5.0, 6.0)
        assert cfgs["exp1"].oms_trim is True and cfgs["exp1"].methods == ("MSL",)
        assert cfgs["lfc"].c0 == (0.1, 0.05) and cfgs["lfc"].seeds == 3

    @pytest.mark.parametrize("text", [
        "[exp3]\nn = 1\n",
        "[exp1]\nreplicas = 3\n",
        "[exp1]\nn = many\n",
        "[exp1]\noms_trim = maybe\n",
        "[exp1]\nmethods = MSL, SCORE\n",
        "[exp1]\ngrid = 1\n",
        "[exp2]\nsnr = 30\n",
        "[rates]\nerr_min = 0.1\nerr_max = 0.01\n",
        "[lfc]\ndegree_profile = cauchy(1)\n",
        "not an ini file",
    ])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("[exp2]\nreplicates = 5\nn = 500\n")
        cfg = load_config(path, "exp2", replicates=7, degree_profile=None)
        assert cfg.replicates == 7 and cfg.n == 500 and cfg.degree_profile == "uniform(0.3,5)"

    def test_load_defaults(self):
        assert load_config(None, "lfc", seeds=2).seeds == 2

    def test_frozen(self):
        with pytest.raises(AttributeError):
            Exp1Config().n = 3
