import math

import pytest

from chspectral.config import (
    PRESETS,
    apply_override,
    config_from_dict,
    evaluate,
    get_preset,
    list_presets,
    parse_config,
)
from chspectral.init import Ball, BallUnion, Noise
from chspectral.models import ConfigError, Model

MINIMAL = """
grid: {n: 64}
model: {name: nmn}
init: {kind: ball, center: [0.5, 0.5], radius: 0.2}
"""


class TestEvaluate:
    def test_numbers_pass_through(self):
        assert evaluate(3, {}) == 3.0
        assert evaluate(2.5e-3, {}) == 2.5e-3

    def test_caret_is_power(self):
        assert evaluate("4*eps^2", {"eps": 0.1}) == pytest.approx(0.04)
        assert evaluate("-2**2", {}) == -4.0

    def test_functions_and_names(self):
        assert evaluate("sqrt(h)/pi", {"h": 4.0, "pi": math.pi}) == pytest.approx(2 / math.pi)

    @pytest.mark.parametrize("bad", ["__import__('os')", "eps.real", "[1]", "eps if 1 else 2", "lambda: 1"])
    def test_rejects_non_arithmetic(self, bad):
        with pytest.raises(ConfigError):
            evaluate(bad, {"eps": 0.1})

    def test_unknown_name_and_division_by_zero(self):
        with pytest.raises(ConfigError, match="unknown name"):
            evaluate("2*delta", {})
        with pytest.raises(ConfigError, match="does not evaluate"):
            evaluate("1/0", {})

    def test_booleans_rejected(self):
        with pytest.raises(ConfigError):
            evaluate(True, {})


class TestParse:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        p = cfg.params
        h = 1 / 64
        assert p.model is Model.NMNCH
        assert p.epsilon == pytest.approx(2 * h)
        assert p.dt == pytest.approx(p.epsilon ** 4)
        assert (p.alpha, p.m, p.gamma) == (2.0, 1.0, 1.0)
        assert p.beta == pytest.approx(2 / p.epsilon ** 2)
        assert cfg.grid.sizes == (64, 64)
        assert cfg.schedule.final_step(p.dt) == 0
        assert cfg.init.mu0 == "consistent"
        assert isinstance(cfg.init.shape, Ball)

    def test_expression_resolved_after_eps(self):
        cfg = parse_config(MINIMAL.replace("{name: nmn}", '{name: cch, epsilon: 0.05, dt: "4*eps^2"}'))
        assert cfg.params.dt == pytest.approx(4 * 0.05 ** 2)

    def test_alpha_below_bound(self):
        with pytest.raises(ConfigError, match="alpha"):
            parse_config(MINIMAL.replace("{name: nmn}", "{name: nmn, alpha: 0.5}"))

    def test_unknown_key_has_path(self):
        with pytest.raises(ConfigError, match=r"model\.epslion"):
            parse_config(MINIMAL.replace("{name: nmn}", "{name: nmn, epslion: 0.1}"))
        with pytest.raises(ConfigError, match=r"init\.radiuss"):
            parse_config(MINIMAL.replace("radius: 0.2", "radiuss: 0.2"))
        with pytest.raises(ConfigError, match="^extra: unknown key"):
            parse_config(MINIMAL + "extra: 1\n")

    def test_missing_key_has_path(self):
        with pytest.raises(ConfigError, match=r"model\.name"):
            parse_config(MINIMAL.replace("{name: nmn}", "{epsilon: 0.1}"))
        with pytest.raises(ConfigError, match=r"config\.grid"):
            parse_config("model: {name: cch}\ninit: {kind: noise}\n")

    def test_steps_xor_time(self):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(MINIMAL + "schedule: {steps: 10, time: 1.0}\n")
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(MINIMAL + "schedule: {diag_every: 2}\n")

    def test_time_rounds_to_steps(self):
        cfg = parse_config(MINIMAL.replace("{name: nmn}", "{name: cch, dt: 0.001}") + "schedule: {time: 0.0105}\n")
        assert cfg.schedule.final_step(cfg.params.dt) == 10

    def test_strides_at_least_one(self):
        with pytest.raises(ConfigError, match="diag_every"):
            parse_config(MINIMAL + "schedule: {steps: 10, diag_every: 0}\n")

    def test_mch_rejects_small_m(self):
        with pytest.raises(ConfigError, match="max M"):
            parse_config(MINIMAL.replace("{name: nmn}", "{name: mch, m: 1}"))

    def test_odd_grid(self):
        with pytest.raises(ConfigError, match="even"):
            parse_config(MINIMAL.replace("{n: 64}", "{n: 63}"))

    def test_sizes_and_lengths(self):
        cfg = parse_config(MINIMAL.replace("{n: 64}", "{sizes: [64, 32], lengths: [2, 1]}"))
        assert cfg.grid.sizes == (64, 32) and cfg.grid.lengths == (2.0, 1.0)
        assert cfg.params.epsilon == pytest.approx(2 / 32)

    def test_noise_defaults_to_zero_mu(self):
        cfg = parse_config(MINIMAL.replace("{kind: ball, center: [0.5, 0.5], radius: 0.2}", "{kind: noise, seed: 4}"))
        assert cfg.init.mu0 == "zero"
        assert cfg.init.shape == Noise(1.0, 4)

    def test_shape_too_large_for_box(self):
        with pytest.raises(ConfigError, match="clearance"):
            parse_config(MINIMAL.replace("radius: 0.2", "radius: 0.49"))

    def test_balls_too_close(self):
        doc = {
            "grid": {"n": 64}, "model": {"name": "cch"},
            "init": {"kind": "balls", "balls": [{"center": [0.3, 0.5], "radius": 0.1},
                                                 {"center": [0.55, 0.5], "radius": 0.1}]},
        }
        with pytest.raises(ConfigError, match="gap"):
            config_from_dict(doc)
        doc["init"]["balls"][1]["center"] = [0.75, 0.5]
        assert isinstance(config_from_dict(doc).init.shape, BallUnion)

    def test_bad_yaml(self):
        with pytest.raises(ConfigError, match="YAML"):
            parse_config("grid: [1, 2\n")

    def test_output_formats(self):
        with pytest.raises(ConfigError, match="formats"):
            parse_config(MINIMAL + "output: {formats: [png]}\n")

    def test_slice_axes_checked_in_3d(self):
        text = """
grid: {dim: 3, n: 16}
model: {name: cch, epsilon: 0.125}
init: {kind: noise}
output: {slice_axes: [3]}
"""
        with pytest.raises(ConfigError, match="slice_axes"):
            parse_config(text)


class TestOverrides:
    def test_nested_set(self):
        doc = {"schedule": {"steps": 5}}
        apply_override(doc, "schedule.steps=100")
        apply_override(doc, "grid.sizes=[32, 32]")
        apply_override(doc, "model.dt=4*eps^2")
        assert doc == {"schedule": {"steps": 100}, "grid": {"sizes": [32, 32]}, "model": {"dt": "4*eps^2"}}

    def test_malformed(self):
        with pytest.raises(ConfigError):
            apply_override({}, "schedule.steps")
        with pytest.raises(ConfigError):
            apply_override({"a": 1}, "a.b=2")


class TestPresets:
    def test_catalog(self):
        names = {p.name for p in list_presets()}
        for base in ("noise2d", "blob2d", "fiveballs2d", "tube3d", "plate3d"):
            for model in ("cch", "mch", "nmn"):
                assert f"{base}-{model}" in names

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_every_preset_validates(self, name):
        p = get_preset(name)
        assert p.description
        cfg = config_from_dict(p.document())
        assert cfg.params.model.value == name.rsplit("-", 1)[1]

    def test_noise2d_parameters(self):
        cfg = config_from_dict(get_preset("noise2d-nmn").document())
        p = cfg.params
        assert cfg.grid.sizes == (512, 512)
        assert p.epsilon == pytest.approx(2 / 512)
        assert p.dt == pytest.approx(4 * p.epsilon ** 2)

    def test_blob2d_parameters(self):
        cfg = config_from_dict(get_preset("blob2d-cch").document())
        assert cfg.grid.spacing == (1 / 256, 1 / 256)
        assert cfg.params.epsilon == pytest.approx(2 / 256)
        assert cfg.params.dt == pytest.approx(cfg.params.epsilon ** 4)

    def test_document_is_a_copy(self):
        doc = get_preset("tube3d-nmn").document()
        doc["grid"]["n"] = 8
        assert get_preset("tube3d-nmn").config["grid"]["n"] == 128

    def test_unknown(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            get_preset("tube2d-cch")
