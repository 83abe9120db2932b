import json

import numpy as np
import pytest

from rsgame.cli import main
from rsgame.generator import assemble
from rsgame.model import load_model, save_model, truncate, uniform_strategy

from tests.test_nash import decoupled_game, matching_pennies
from tests.test_simulate import flip_flop_model


@pytest.fixture
def decoupled_path(tmp_path):
    model = decoupled_game(np.random.default_rng(70), n_states=3, m=2)
    path = tmp_path / "decoupled.json"
    save_model(model, path)
    return str(path)


class TestSolve:
    def test_decoupled_model_exits_zero_with_tiny_gaps(self, decoupled_path,
                                                       tmp_path):
        out = str(tmp_path / "cert.json")
        code = main(["solve", "--model", decoupled_path, "--trunc", "3",
                     "--eps", "1e-8", "--out", out])
        assert code == 0
        doc = json.loads(open(out).read())
        assert doc["certificate"]["status"] == "converged"
        assert max(abs(d) for d in doc["certificate"]["delta"]) <= 1e-8
        assert doc["converse"]["passed"] is True

    def test_cycling_game_exits_one_with_artifact(self, tmp_path):
        path = tmp_path / "pennies.json"
        save_model(matching_pennies(), path)
        out = str(tmp_path / "cert.json")
        code = main(["solve", "--model", str(path), "--trunc", "1",
                     "--eps", "1e-9", "--out", out])
        assert code == 1
        doc = json.loads(open(out).read())
        assert doc["certificate"]["status"] == "cycle_detected"

    def test_byte_identical_reruns(self, decoupled_path, tmp_path):
        outs = []
        for k in (1, 2):
            out = tmp_path / f"cert{k}.json"
            assert main(["solve", "--model", decoupled_path, "--trunc", "3",
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestLadder:
    def test_shop_fixed_uniform_csv(self, tmp_path):
        out = tmp_path / "ladder.csv"
        code = main(["ladder", "--builtin", "shop", "--trunc", "5,8,11",
                     "--fixed-uniform", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "n,rho,residual,iterations,error"
        rows = [line.split(",") for line in lines[1:]]
        ns = [int(r[0]) for r in rows]
        rhos = [float(r[1]) for r in rows]
        assert ns == [5, 8, 11]
        assert all(b - a >= -1e-10 for a, b in zip(rhos, rhos[1:]))

    def test_failed_rung_recorded_and_exit_one(self, tmp_path):
        out = tmp_path / "ladder.csv"
        code = main(["ladder", "--builtin", "shop", "--trunc", "40",
                     "--tol", "1e-14", "--out", str(out)])
        assert code == 1
        assert "did not reach" in out.read_text()


class TestSimulate:
    def test_zero_cost_model(self, tmp_path):
        model_path = tmp_path / "zero.json"
        zero = decoupled_game(np.random.default_rng(71), n_states=2, m=1)
        # strip the costs: rebuild with all-zero tables
        from rsgame.model import model_to_dict
        doc = model_to_dict(zero)
        doc["costs"] = []
        model_path.write_text(json.dumps(doc))
        out = tmp_path / "sim.csv"
        code = main(["simulate", "--model", str(model_path), "--horizon",
                     "20", "--paths", "100", "--batches", "10", "--seed",
                     "5", "--out", str(out)])
        assert code == 0
        final = out.read_text().strip().splitlines()[-1].split(",")
        assert final[0] == "all"
        assert float(final[1]) == 0.0

    def test_workers_do_not_change_artifact(self, tmp_path):
        model_path = tmp_path / "flip.json"
        save_model(flip_flop_model(), model_path)
        blobs = []
        for w in ("1", "2", "8"):
            out = tmp_path / f"sim{w}.csv"
            code = main(["simulate", "--model", str(model_path), "--horizon",
                         "30", "--paths", "400", "--batches", "10", "--seed",
                         "9", "--workers", w, "--out", str(out)])
            assert code == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]

    def test_hitting_check_on_shop(self, tmp_path):
        out = tmp_path / "sim.csv"
        code = main(["simulate", "--builtin", "shop", "--trunc", "20",
                     "--horizon", "5", "--paths", "1000", "--batches", "10",
                     "--seed", "3", "--start", "1", "--hitting",
                     "--hit-targets", "1,2,3", "--hit-starts", "4,5",
                     "--out", str(out)])
        assert code == 0
        lines = (tmp_path / "sim.csv.hitting.csv").read_text().splitlines()
        assert lines[0].startswith("start,psi,estimate")
        assert len(lines) == 3


class TestVerify:
    def test_shop_defaults_pass(self, tmp_path):
        out = tmp_path / "verify.json"
        code = main(["verify", "--builtin", "shop", "--range", "60",
                     "--trunc", "25", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["shop_conditions"]["all_pass"] is True
        assert doc["irreducibility"]["irreducible"] is True
        assert doc["growth_drift"]["status"] == "holds-on-checked-range"

    def test_finite_model_basic_checks(self, decoupled_path, tmp_path):
        out = tmp_path / "verify.json"
        code = main(["verify", "--model", decoupled_path, "--range", "3",
                     "--trunc", "3", "--out", str(out)])
        assert code == 0


class TestConfigHandling:
    def test_config_file_with_flag_override(self, decoupled_path, tmp_path):
        conf = tmp_path / "run.json"
        conf.write_text(json.dumps({"model": decoupled_path, "trunc": "3",
                                    "eps": 1e-6, "out": str(tmp_path / "a.json")}))
        out = str(tmp_path / "b.json")
        code = main(["solve", "--config", str(conf), "--out", out])
        assert code == 0
        assert json.loads(open(out).read())["eps"] == 1e-6

    def test_unknown_config_key_rejected(self, tmp_path):
        conf = tmp_path / "run.json"
        conf.write_text(json.dumps({"bogus": 1}))
        assert main(["solve", "--config", str(conf)]) == 2

    def test_missing_model_is_config_error(self):
        assert main(["solve"]) == 2
        assert main(["solve", "--model", "x.json", "--builtin", "shop"]) == 2

    def test_bad_values_rejected(self, decoupled_path):
        assert main(["solve", "--model", decoupled_path, "--eps", "-1"]) == 2
        assert main(["solve", "--model", decoupled_path, "--player", "3"]) == 2
        assert main(["ladder", "--builtin", "shop", "--trunc", "0"]) == 2

    def test_round_trip_assembles_identically(self, decoupled_path, tmp_path):
        model = load_model(decoupled_path)
        save_model(model, tmp_path / "again.json")
        back = load_model(tmp_path / "again.json")
        trunc, _ = truncate(model, 3)
        A0 = assemble(model, trunc, uniform_strategy(model, 1),
                      uniform_strategy(model, 2), 1)
        A1 = assemble(back, trunc, uniform_strategy(back, 1),
                      uniform_strategy(back, 2), 1)
        assert np.array_equal(A0.A.toarray(), A1.A.toarray())
        assert A0.alpha == A1.alpha
