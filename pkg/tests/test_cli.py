import pytest

from jptdp import *
from jptdp.__main__ import main

TINY = ["--char-dim", "3", "--char-state-dim", "3", "--word-dim", "4",
        "--ctx-dim", "5", "--mlp-hidden", "6"]


@pytest.fixture
def trained(sample_file, tmp_path):
    path = str(tmp_path / "model.bin")

    code = main(["train", "--train", sample_file, "--dev", sample_file,
                 "--model", path, "--epochs", "1", "-c", "2", "-q"] + TINY)

    assert code == 0
    return path


class TestEval:

    def test_gold_against_itself(self, sample_file, capsys):
        assert main(["eval", "--gold", sample_file, "--pred", sample_file,
                     "-q"]) == 0

        out = capsys.readouterr().out.splitlines()

        assert out == ["upos=1.0000", "uas=1.0000", "las=1.0000",
                       "mixed=1.0000", "tokens=7"]

    def test_misaligned_files(self, sample_file, tmp_path, capsys):
        other = tmp_path / "other.conllu"
        other.write_text("1\tHi\t_\tX\t_\t_\t0\troot\t_\t_\n\n")

        assert main(["eval", "--gold", sample_file, "--pred", str(other),
                     "-q"]) == 1
        assert "ERROR" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        missing = str(tmp_path / "missing.conllu")
        assert main(["eval", "--gold", missing, "--pred", missing, "-q"]) == 1


class TestUsage:

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as error:
            main(["train", "--model", "m.bin"])
        assert error.value.code == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as error:
            main(["serve"])
        assert error.value.code == 2

    def test_concurrency_must_be_positive(self, sample_file):
        with pytest.raises(SystemExit) as error:
            main(["predict", "--model", "m", "--input", sample_file,
                  "--output", "o", "-c", "0"])
        assert error.value.code == 2

    @pytest.mark.parametrize("flag,value", [
        ("--seed", "-1"),
        ("--seed", "one"),
        ("--epochs", "0"),
        ("--word-dim", "0"),
        ("--char-dim", "-3"),
        ("--ctx-layers", "0"),
        ("--mlp-hidden", "0"),
        ("--word-dropout", "-0.25"),
        ("--noise-sigma", "-1"),
        ("--margin", "-1"),
        ("--margin", "nan"),
        ("--learning-rate", "0")
    ])
    def test_bad_training_values(self, flag, value, sample_file, tmp_path,
                                 capsys):
        model = str(tmp_path / "model.bin")

        with pytest.raises(SystemExit) as error:
            main(["train", "--train", sample_file, "--model", model,
                  flag, value, "-q"])

        assert error.value.code == 2
        assert "usage:" in capsys.readouterr().err
        assert not (tmp_path / "model.bin").exists()

    def test_malformed_seed_variable(self, sample_file, tmp_path,
                                     monkeypatch):
        monkeypatch.setenv("JPTDP_SEED", "abc")

        with pytest.raises(SystemExit) as error:
            main(["train", "--train", sample_file,
                  "--model", str(tmp_path / "model.bin"), "-q"])
        assert error.value.code == 2

    def test_seed_variable(self, sample_file, tmp_path, monkeypatch):
        monkeypatch.setenv("JPTDP_SEED", "5")
        path = str(tmp_path / "model.bin")

        assert main(["train", "--train", sample_file, "--model", path,
                     "--epochs", "1", "-q"] + TINY) == 0
        assert deserialize(path).hyper.seed == 5


class TestTrainAndPredict:

    def test_train_prints_epochs_and_summary(self, sample_file, tmp_path,
                                             capsys):
        path = str(tmp_path / "model.bin")

        main(["train", "--train", sample_file, "--model", path,
              "--epochs", "2", "-q"] + TINY)

        lines = capsys.readouterr().out.splitlines()

        assert [line.split()[:2] for line in lines[:2]] == \
            [["epoch", "1"], ["epoch", "2"]]
        assert lines[2].startswith("best epoch ")

    def test_no_chars_is_recorded(self, sample_file, tmp_path):
        path = str(tmp_path / "model.bin")

        assert main(["train", "--train", sample_file, "--model", path,
                     "--epochs", "1", "--no-chars", "-q"] + TINY) == 0

        assert deserialize(path).hyper.use_chars is False

    def test_predict_writes_valid_conllu(self, trained, sample_file,
                                         tmp_path, capsys):
        output = tmp_path / "pred.conllu"

        assert main(["predict", "--model", trained, "--input", sample_file,
                     "--output", str(output), "-q"]) == 0

        predicted = read_conllu(str(output))
        gold = read_conllu(sample_file)

        assert [s.forms for s in predicted] == [s.forms for s in gold]
        assert predicted.sentences[1].raw_lines[1].startswith("1-2\t")
        for sentence in predicted:
            assert is_projective(sentence)
            assert sentence.heads.count(0) == 1

        assert "words/second" in capsys.readouterr().err

    def test_predict_is_reproducible(self, trained, sample_file, tmp_path):
        outputs = []
        for name in ("a.conllu", "b.conllu"):
            output = tmp_path / name
            main(["predict", "--model", trained, "--input", sample_file,
                  "--output", str(output), "-c", "3", "-q"])
            outputs.append(output.read_bytes())

        assert outputs[0] == outputs[1]

    def test_missing_checkpoint(self, sample_file, tmp_path):
        assert main(["predict", "--model", str(tmp_path / "none.bin"),
                     "--input", sample_file,
                     "--output", str(tmp_path / "out.conllu"), "-q"]) == 1


def test_stats(sample_file, capsys):
    assert main(["stats", sample_file, "--train", sample_file, "-q"]) == 0

    out = capsys.readouterr().out

    assert "sentences=2 tokens=7 nonprojective=0.0000 oov=0.0000" in out
