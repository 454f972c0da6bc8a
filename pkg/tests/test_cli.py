import json

import numpy as np
import pytest

from nszcap import graphspace as gs
from nszcap.cli import (
    EXIT_INPUT,
    EXIT_OK,
    EXIT_VERIFY,
    channel_to_document,
    document_to_channel,
    main,
    parse_builtin_arg,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestDocuments:
    @pytest.mark.parametrize("make", [
        lambda: gs.example4_channel(0.75),
        lambda: gs.amplitude_damping_channel(0.3),
        lambda: gs.prop11_channel(),
    ])
    def test_kraus_round_trip(self, make):
        ch = make()
        doc = channel_to_document(ch)
        back = document_to_channel(json.loads(json.dumps(doc)))
        assert back.d_in == ch.d_in and back.d_out == ch.d_out
        for E, F in zip(ch.kraus, back.kraus):
            assert np.abs(E - F).max() <= 1e-15

    def test_cq_round_trip(self):
        C = gs.cq_from_states(gs.example4_states(0.75))
        doc = channel_to_document(C)
        back = document_to_channel(json.loads(json.dumps(doc)))
        for P, Q in zip(C.projections, back.projections):
            assert np.abs(P - Q).max() <= 1e-12

    def test_missing_field_named(self):
        from nszcap.matrixcore import ValidationError
        with pytest.raises(ValidationError, match="kraus"):
            document_to_channel({"type": "kraus", "d_in": 2, "d_out": 2})

    def test_unknown_type(self):
        from nszcap.matrixcore import ValidationError
        with pytest.raises(ValidationError, match="unknown type"):
            document_to_channel({"type": "banana"})

    def test_builtin_arg_parsing(self):
        ch = parse_builtin_arg("example4:alpha_sq=0.9")
        assert isinstance(ch, gs.KrausChannel)
        with pytest.raises(Exception):
            parse_builtin_arg("no-such-channel")


class TestCompute:
    def test_builtin_example4(self, capsys):
        code, out, _ = run_cli(capsys, "compute", "--builtin",
                               "example4:alpha_sq=0.75", "--quantity", "upsilon-hat")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["value"] == pytest.approx(4 / 3, abs=1e-6)
        assert doc["status"] == "optimal"

    def test_superdense_bound(self, capsys):
        code, out, _ = run_cli(capsys, "compute", "--builtin",
                               "amplitude-damping:r=0.75",
                               "--quantity", "superdense-bound")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["value"] == pytest.approx(10 / 9, abs=1e-9)

    def test_prop11_packing(self, capsys):
        code, out, _ = run_cli(capsys, "compute", "--builtin", "prop11",
                               "--quantity", "aram")
        assert code == EXIT_OK
        assert json.loads(out)["value"] <= 1.17511

    def test_channel_file(self, capsys, tmp_path):
        doc = channel_to_document(gs.example4_channel(0.75))
        path = tmp_path / "chan.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run_cli(capsys, "compute", "--channel", str(path),
                               "--quantity", "upsilon")
        assert code == EXIT_OK
        assert json.loads(out)["value"] == pytest.approx(1.0, abs=1e-6)

    def test_cq_document_quantities(self, capsys, tmp_path):
        doc = channel_to_document(gs.cq_from_states(gs.example4_states(0.75)))
        path = tmp_path / "cq.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run_cli(capsys, "compute", "--channel", str(path),
                               "--quantity", "aram-cq")
        assert code == EXIT_OK
        assert json.loads(out)["value"] == pytest.approx(4 / 3, abs=1e-6)

    def test_cq_quantity_on_kraus_input_is_input_error(self, capsys):
        code, _, err = run_cli(capsys, "compute", "--builtin", "prop11",
                               "--quantity", "upsilon-cq")
        assert code == EXIT_INPUT
        assert "cq" in err

    def test_malformed_document(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"type": "kraus", "d_in": 2}))
        code, _, err = run_cli(capsys, "compute", "--channel", str(path),
                               "--quantity", "upsilon")
        assert code == EXIT_INPUT
        assert "d_out" in err or "kraus" in err

    def test_missing_source(self, capsys):
        code, _, err = run_cli(capsys, "compute", "--quantity", "upsilon")
        assert code == EXIT_INPUT

    def test_dimension_guard(self, capsys, monkeypatch):
        monkeypatch.setenv("NSZCAP_MAX_DIM", "8")
        code, _, err = run_cli(capsys, "compute", "--builtin", "delta:l=3",
                               "--quantity", "upsilon")
        assert code == EXIT_INPUT
        assert "NSZCAP_MAX_DIM" in err

    def test_witness_emission(self, capsys):
        code, out, _ = run_cli(capsys, "compute", "--builtin",
                               "example4:alpha_sq=0.75",
                               "--quantity", "upsilon-hat", "--witness")
        doc = json.loads(out)
        S = doc["witness"]["S_A"]
        assert isinstance(S[0][0], list) and len(S[0][0]) == 2
        total = sum(S[i][i][0] for i in range(len(S)))
        assert total == pytest.approx(doc["value"], abs=1e-6)


class TestVerify:
    def test_single_check(self, capsys):
        code, out, err = run_cli(capsys, "verify", "--only", "lemma2",
                                 "--seed", "42")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["num_failed"] == 0
        assert all(c["name"] == "lemma2" for c in doc["checks"])
        assert "lemma2" in err

    def test_unreasonable_tolerance_exits_3(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--only", "theorem7",
                               "--tolerance", "1e-13")
        assert code == EXIT_VERIFY
        assert json.loads(out)["num_failed"] > 0


class TestExamples:
    def test_lists_builtins(self, capsys):
        code, out, _ = run_cli(capsys, "examples")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert "prop11" in doc["builtins"]
        assert "alpha_sq" in doc["builtins"]["example4"]["params"]
        assert "l" in doc["builtins"]["delta"]["params"]
