import math

import pytest

from fvac.config import ConfigError, DEFAULTS, load_config, parse_blocks, read_config, valid_keys
from fvac.params import reference_experiment

DIMLESS = """
# desk run
dimensionless {
    L_tilde = 100
    M = 256
    t_f_tilde = 10
    tau = 1e-4      # warmer than default
    rho_tilde = 200
    nu_tilde: 0.005
    lambda = 1.3; omega_tilde = 60
    dt_tilde = 5e-4
    n_traj = 32
    seed = 7
}
"""


def test_dimensionless_block():
    rc = load_config(DIMLESS)
    p = rc.params
    assert (p.L, p.tau, p.rho0, p.nu, p.lam, p.omega) == (100, 1e-4, 200, 0.005, 1.3, 60)
    assert rc.run["M"] == 256 and rc.run["n_traj"] == 32 and rc.run["seed"] == 7
    assert rc.run["t_f_tilde"] == 10 and rc.run["dt_tilde"] == 5e-4
    assert rc.run["save_stride"] == DEFAULTS["save_stride"]
    assert rc.source == "dimensionless" and rc.scan == {}


def test_physical_block():
    p = reference_experiment()
    body = "\n".join(f"{k} = {getattr(p, k)!r}" for k in p.__dataclass_fields__)
    rc = load_config(f"physical {{\n{body}\nn_traj = 4\n}}")
    assert rc.params.L == pytest.approx(100.0, rel=2e-3)
    assert rc.params.lam == pytest.approx(1.2)
    assert rc.run["n_traj"] == 4
    assert rc.source == "physical"


def test_physical_missing_key():
    with pytest.raises(ConfigError, match="missing"):
        load_config("physical { mass_m = 1e-25 }")


def test_scan_block():
    rc = load_config(DIMLESS + "scan {\n tau = 1e-5, 1e-4\n nu_tilde = 0.005, 0.007, 0.009\n}")
    assert rc.scan == {"tau": [1e-5, 1e-4], "nu_tilde": [0.005, 0.007, 0.009]}


def test_unknown_key_lists_valid_names():
    with pytest.raises(ConfigError) as info:
        load_config("dimensionless { temperature = 3 }")
    msg = str(info.value)
    for name in ["L_tilde", "t_f_tilde", "M", "tau", "rho_tilde", "nu_tilde", "lambda",
                 "omega_tilde", "dt_tilde", "n_traj", "seed"]:
        assert name in msg


@pytest.mark.parametrize(
    "text,match",
    [
        ("", "exactly one"),
        ("dimensionless { } physical { }", "exactly one"),
        ("dimensionless { M = 12.5 }", "M"),
        ("dimensionless { tau = hot }", "tau"),
        ("dimensionless { nu_tilde = -1 }", "nu"),
        ("dimensionless { M }", "parse"),
        ("dimensionless { } extras { }", "unknown block"),
        ("dimensionless { } trailing", "outside"),
        ("dimensionless { } dimensionless { }", "twice"),
        ("dimensionless { } scan { tau = }", "tau"),
        ("dimensionless { } scan { rho_tilde = 1, 2 }", "rho_tilde"),
        ("dimensionless { snapshots = maybe }", "snapshots"),
    ],
)
def test_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(text)


def test_overrides():
    rc = load_config(DIMLESS).with_overrides({"tau": "1e-5", "n_traj": "3", "snapshots": "yes"})
    assert rc.params.tau == 1e-5 and rc.run["n_traj"] == 3 and rc.run["snapshots"] is True
    assert rc.params.nu == 0.005
    with pytest.raises(ConfigError, match="valid keys"):
        rc.with_overrides({"bogus": "1"})


def test_defaults_are_reference_values():
    rc = load_config("dimensionless { }")
    p = rc.params
    assert (p.L, p.rho0, p.tau, p.lam, p.omega, p.nu) == (100.0, 200.0, 1e-5, 1.2, 50.0, 0.007)
    assert rc.run["M"] == 256 and rc.run["t_f_tilde"] == 60.0 and rc.run["dt_tilde"] == 7.5e-4
    assert math.isclose(rc.run["t_f_tilde"] / rc.run["dt_tilde"], 80000)


def test_parse_blocks_comments():
    b = parse_blocks("a { x = 1 # c\n y: 2 }  # tail")
    assert b == {"a": {"x": "1", "y": "2"}}


def test_valid_keys():
    assert "lambda" in valid_keys("dimensionless")
    assert "mass_m" in valid_keys("physical")
    assert valid_keys("scan") == ["tau", "nu_tilde", "lambda", "omega_tilde", "M"]
    with pytest.raises(ConfigError):
        valid_keys("nope")


def test_read_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(DIMLESS)
    assert read_config(p).run["n_traj"] == 32
