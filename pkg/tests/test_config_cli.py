import json
import math

import pytest

from mpdlab import cli
from mpdlab.config import DEFAULTS, ExperimentConfig, ResultEnvelope, apply_overrides, load_config, parse_config
from mpdlab.errors import ConfigError

BUMPS = [{"center": [0.2, 1.1], "radius": 1.2, "amplitude": 0.05}]


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_defaults_fill_in():
    cfg = load_config({})
    assert cfg.data["depth"] == DEFAULTS["depth"]
    assert cfg.metric().is_unperturbed


def test_round_trip_preserves_hash(tmp_path):
    cfg = load_config({"perturbation": {"conformal": BUMPS}, "depth": 1})
    again = parse_config(write(tmp_path, json.loads(cfg.to_json())))
    assert again == cfg
    assert again.hash() == cfg.hash()


def test_hash_changes_with_content():
    assert load_config({"depth": 1}).hash() != load_config({"depth": 2}).hash()


@pytest.mark.parametrize("data,path", [
    ({"nonsense": 1}, "nonsense"),
    ({"numerics": {"ode_stepp": 1e-3}}, "numerics.ode_stepp"),
    ({"numerics": {"ode_step": -1e-3}}, "numerics.ode_step"),
    ({"numerics": {"fd_steps": []}}, "numerics.fd_steps"),
    ({"depth": -1}, "depth"),
    ({"perturbation": {"conformal": [{"center": [0.2, -1.0], "radius": 1.0, "amplitude": 0.1}]}},
     "perturbation.conformal[0]"),
    ({"perturbation": {"conformal": [{"center": [0.2, 1.0], "radius": 1.0}]}}, "perturbation.conformal[0]"),
    ({"perturbation": {"tensors": [{"kind": "cubic", "bumps": BUMPS}]}}, "perturbation.tensors[0].kind"),
    ({"perturbation": {"scale": 0}}, "perturbation.scale"),
    ({"group": {"generators": {"a": [[2, 0], [0, 1]]}}}, "group.generators.a"),
    ({"family": {"kind": "spiral"}}, "family.kind"),
])
def test_validation_names_the_field(data, path):
    with pytest.raises(ConfigError) as info:
        load_config(data)
    assert info.value.path.startswith(path)


def test_custom_generators_accepted():
    from mpdlab.fuchsian import octagon_group
    gens = {k: g.matrix.tolist() for k, g in octagon_group().generators.items()}
    cfg = load_config({"group": {"generators": gens, "relator": "aBcDAbCd"}})
    assert cfg.group.relator == "aBcDAbCd"


def test_overrides_parse_json_values():
    data = apply_overrides({}, ["numerics.ode_step=5e-4", "depth=1", "classes=[\"ab\"]", "output_dir=out"])
    cfg = load_config(data)
    assert cfg.numerics["ode_step"] == 5e-4
    assert cfg.numerics["burn_in"] == DEFAULTS["numerics"]["burn_in"]
    assert cfg.data["classes"] == ["ab"] and cfg.output_dir() == "out"


def test_override_must_be_key_value():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["depth"])


def test_output_dir_from_environment(monkeypatch):
    monkeypatch.setenv("MPDLAB_OUT", "/tmp/elsewhere")
    assert load_config({}).output_dir() == "/tmp/elsewhere"


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        parse_config(str(bad))


def test_envelope_fields():
    cfg = load_config({})
    env = ResultEnvelope("kappa", cfg, {"kappa": 1.0}).to_dict()
    assert env["config_hash"] == cfg.hash() and env["numerics"] == cfg.numerics
    assert {"version", "timestamp", "payload", "ok"} <= set(env)


# --- command line -------------------------------------------------------------------

def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1])


def test_export(tmp_path, capsys):
    code, summary = run_cli(["export", "--out", str(tmp_path), "--csv"], capsys)
    assert code == 0 and summary["ok"]
    payload = json.loads((tmp_path / "export.json").read_text())["payload"]
    assert payload["domain_area"] == pytest.approx(4 * math.pi, rel=1e-8)
    assert (tmp_path / "domain_grid.csv").read_text().startswith("x,y,weight")


def test_spectrum_command(tmp_path, capsys):
    cfg = write(tmp_path, {"perturbation": {"conformal": BUMPS}, "depth": 1})
    code, _ = run_cli(["spectrum", "--config", cfg, "--out", str(tmp_path), "--csv"], capsys)
    assert code == 0
    env = json.loads((tmp_path / "spectrum.json").read_text())
    assert [e["word"] for e in env["payload"]["entries"]] == list("aAbBcCdD")
    assert len((tmp_path / "spectrum.csv").read_text().splitlines()) == 9


def test_mpd_command_reports_both_routes(tmp_path, capsys):
    code, _ = run_cli(["mpd", "--out", str(tmp_path), "--set", "classes=[\"ab\"]",
                       "--set", "perturbation.conformal=" + json.dumps(BUMPS)], capsys)
    assert code == 0
    row = json.loads((tmp_path / "mpd.json").read_text())["payload"]["classes"][0]
    assert abs(row["monodromy_route"] - row["riccati_route"]) < 1e-6 * row["monodromy_route"]
    assert row["monodromy_det"] == pytest.approx(1.0, abs=1e-9)


def test_kappa_command(tmp_path, capsys):
    code, _ = run_cli(["kappa", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert json.loads((tmp_path / "kappa.json").read_text())["payload"]["kappa"] == pytest.approx(1.0, abs=1e-12)


def test_config_error_exit_code(tmp_path, capsys):
    code, payload = run_cli(["kappa", "--out", str(tmp_path), "--set", "numerics.ode_step=-1"], capsys)
    assert code == 1
    assert payload == json.loads((tmp_path / "error.json").read_text())
    assert payload["error"]["kind"] == "configuration" and payload["error"]["path"] == "numerics.ode_step"


def test_curvature_sign_error_reported(tmp_path, capsys):
    big = [{"center": [0.2, 1.1], "radius": 0.8, "amplitude": 3.0}]
    code, payload = run_cli(["kappa", "--out", str(tmp_path), "--set", "perturbation.conformal=" + json.dumps(big)],
                            capsys)
    assert code == 1 and payload["error"]["kind"] == "curvature-sign"
    assert payload["error"]["points"]


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2


def test_validate_command(tmp_path, capsys):
    code, summary = run_cli(["validate", "--out", str(tmp_path)], capsys)
    payload = json.loads((tmp_path / "validate.json").read_text())["payload"]
    assert code == 0 and summary["ok"]
    assert payload["failed"] == 0 and payload["passed"] == len(payload["results"])


def test_all_commands_have_handlers():
    assert set(cli.COMMANDS) == set(cli.HANDLERS)
