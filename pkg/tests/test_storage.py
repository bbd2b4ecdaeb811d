import json
from pathlib import Path

import numpy as np
import pytest

from services.cascade import exact_influence
from services.errors import InstanceError
from services.game import star_poa_instance
from services.generators import classical_import, gnp_instance, suite_instance, two_node_demo
from services.model import TriggeringKind
from services.oracle import InfluenceOracle
from services.verification import dr_counterexample_instance
from utils.storage import (
    dump_report,
    game_from_dict,
    game_to_dict,
    instance_digest,
    instance_from_dict,
    instance_to_dict,
    is_game_file,
    load_experiment_settings,
    load_game,
    load_instance,
    save_document,
)

FIXTURES = Path(__file__).parent / "fixtures"


class TestInstanceFiles:
    def test_frozen_counterexample(self):
        instance = load_instance(FIXTURES / "dr_counterexample.json")
        oracle = InfluenceOracle.exact(instance)
        values = [oracle.value((k, 0, 0)) for k in range(3)]
        assert values == [0.0, 1.0, 3.0]
        # the second unit on agent 0 is worth more than the first
        assert values[1] - values[0] < values[2] - values[1]
        assert instance_digest(instance) == instance_digest(dr_counterexample_instance())

    def test_names_resolve(self):
        instance = load_instance(FIXTURES / "named_classical.json")
        assert instance.names == ("ann", "bob", "cy")
        assert instance.triggering.kind is TriggeringKind.CLASSICAL
        assert exact_influence(instance, (1, 0, 0)) == pytest.approx(2.0)

    @pytest.mark.parametrize("instance", [
        two_node_demo(),
        gnp_instance(5, 0.5, 2, seed=3),
        suite_instance(np.random.default_rng(1)),
        classical_import(["a b 0.5", "b c 1.0"], budget=1),
    ])
    def test_save_and_load_preserve_content(self, tmp_path, instance):
        path = Path(save_document(instance, tmp_path / "instance.json"))
        loaded = load_instance(path)
        assert instance_to_dict(loaded) == instance_to_dict(instance)
        assert instance_digest(loaded) == instance_digest(instance)

    def test_zero_budget_survives_saving(self, tmp_path):
        data = instance_to_dict(two_node_demo())
        data["budget"], data["capacities"] = 0, [0, 0]
        data["triggering"]["edges"][0]["support"] = [{"value": 1, "prob": 1.0}]
        instance = instance_from_dict(data)
        assert load_instance(save_document(instance, tmp_path / "zero.json")).constraints.capacities == (0, 0)

    def test_digest_tracks_content(self):
        assert instance_digest(two_node_demo()) != instance_digest(two_node_demo(budget=2))
        assert instance_digest(gnp_instance(6, 0.5, 2, seed=7)) == instance_digest(gnp_instance(6, 0.5, 2, seed=7))

    def test_schema_errors_are_listed(self):
        data = instance_to_dict(two_node_demo())
        data["capacities"] = [1, -1]
        data["extra"] = True
        with pytest.raises(InstanceError) as excinfo:
            instance_from_dict(data, "bad.json")
        assert "bad.json" in str(excinfo.value)
        assert "capacities/1" in str(excinfo.value)

    def test_duplicate_edge_spec(self):
        data = instance_to_dict(two_node_demo())
        data["triggering"]["edges"].append(data["triggering"]["edges"][0])
        with pytest.raises(InstanceError, match="duplicate"):
            instance_from_dict(data)

    def test_unknown_name(self):
        data = json.loads((FIXTURES / "named_classical.json").read_text())
        data["edges"][0]["from"] = "dee"
        with pytest.raises(InstanceError, match="dee"):
            instance_from_dict(data)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{")
        with pytest.raises(InstanceError, match="not valid JSON"):
            load_instance(path)


class TestGameFiles:
    def test_star_round_trip(self, tmp_path):
        game = star_poa_instance(3)
        path = save_document(game, tmp_path / "star.json")
        assert is_game_file(path)
        loaded = load_game(path)
        assert game_to_dict(loaded) == game_to_dict(game)
        assert loaded.num_players == 3

    def test_default_delay(self):
        data = game_to_dict(star_poa_instance(2))
        del data["delay"]
        assert game_from_dict(data).delay.rate == 1.0

    def test_plain_instance_is_not_a_game(self, tmp_path):
        path = save_document(two_node_demo(), tmp_path / "demo.json")
        assert not is_game_file(path)


class TestExperimentSettings:
    def test_missing_file_uses_defaults(self, tmp_path):
        assert load_experiment_settings(tmp_path / "missing.json")["alpha"] == 0.4

    def test_partial_file(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"trials": 10}))
        settings = load_experiment_settings(path)
        assert settings["trials"] == 10
        assert settings["p_secretary"] == 0.375

    def test_invalid_file_is_ignored(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"trials": "many"}))
        assert load_experiment_settings(path)["trials"] == 2000


class TestReports:
    def test_dump_report_writes_sorted_json(self, tmp_path):
        output = tmp_path / "out" / "report.json"
        text = dump_report({"b": 1, "a": [1, 2]}, output)
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(output.read_text()) == {"a": [1, 2], "b": 1}
