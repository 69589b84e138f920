import math

import numpy as np
import pytest

from jptdp import *


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


@pytest.fixture
def he_runs():
    return parse_conllu("1\tHe\the\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
                        "2\truns\trun\tVERB\t_\t_\t0\troot\t_\t_\n\n")


@pytest.fixture
def vocab(he_runs):
    return build_vocab(he_runs)


def sequence(rng, length, dim):
    return [constant(rng.normal(size=dim)) for _ in range(length)]


class TestVocab:

    def test_words(self, vocab):
        assert vocab.words == [UNK_WORD_FORM, ROOT_WORD_FORM, "he", "runs"]
        assert vocab.word_freq == {"he": 1, "runs": 1}
        assert vocab.word_id("HE") == vocab.word_to_id["he"]
        assert vocab.word_id("zzzz") == UNK_WORD

    def test_chars_keep_case(self, vocab):
        assert set("Hernus") <= set(vocab.char_to_id)
        assert "h" not in vocab.char_to_id
        assert vocab.char_to_id[UNK_CHAR_FORM] == UNK_CHAR
        assert set(ROOT_FORM) <= set(vocab.char_to_id)

    def test_tags_and_relations(self, vocab):
        assert vocab.tags == ["PRON", "VERB"]
        assert vocab.rels == ["nsubj", "root"]

    def test_empty_treebank(self):
        with pytest.raises(ConfigurationError):
            build_vocab(Treebank([]))


class TestWordDropout:

    @pytest.fixture
    def table(self, vocab):
        return EmbeddingTable.create("words", len(vocab.word_to_id), 4,
                                     np.random.default_rng(1))

    def row_of(self, table, node):
        matches = [i for i in range(table.size)
                   if np.array_equal(table.matrix.value[i], node.value)]
        return matches[0]

    def test_zero_alpha_never_drops(self, table, vocab):
        rng = np.random.default_rng(0)

        for _ in range(100):
            node = word_dropout_lookup(table, vocab, "runs", True, 0.0, rng)
            assert self.row_of(table, node) == vocab.word_id("runs")

    def test_unknown_word_at_inference(self, table, vocab):
        node = word_dropout_lookup(table, vocab, "zzzz", False, 0.25)
        assert self.row_of(table, node) == UNK_WORD

    def test_inference_never_drops(self, table, vocab):
        node = word_dropout_lookup(table, vocab, "He", False, 0.25)
        assert self.row_of(table, node) == vocab.word_id("he")

    def test_drop_rate(self, table, vocab):
        rng = np.random.default_rng(2)
        unk = table.matrix.value[UNK_WORD]

        trials = 10 ** 5
        dropped = sum(
            np.array_equal(word_dropout_lookup(table, vocab, "runs", True,
                                               0.25, rng).value, unk)
            for _ in range(trials)
        )

        assert 0.19 <= dropped / trials <= 0.21

    def test_negative_alpha(self, table, vocab):
        with pytest.raises(ConfigurationError):
            word_dropout_lookup(table, vocab, "runs", False, -1.0)

    def test_lookup_row_is_trained_alone(self, table):
        before = table.matrix.value.copy()

        backward(total(table.lookup(2)))
        adam_update(table.parameters())

        changed = [not np.array_equal(a, b)
                   for a, b in zip(before, table.matrix.value)]
        assert changed == [i == 2 for i in range(table.size)]


class TestLSTM:

    def test_zero_weights(self):
        params = LSTMParams.create("lstm", 2, 3)
        c_prev = np.array([1.0, -2.0, 0.5])

        h, c = lstm_step(params, constant([0.3, 0.7]), zeros(3),
                         constant(c_prev))

        np.testing.assert_allclose(c.value, 0.5 * c_prev)
        np.testing.assert_allclose(h.value, 0.5 * np.tanh(0.5 * c_prev))

    def test_scalar_trace(self):
        params = LSTMParams.create("lstm", 1, 1)
        params.input_weights.assign(np.array([[0.5], [-0.3], [0.8], [1.2]]))
        params.recurrent_weights.assign(np.array([[0.1], [0.2], [-0.4],
                                                  [0.6]]))
        params.bias.assign(np.array([0.0, 1.0, 0.1, -0.2]))

        h, c = 0.0, 0.0
        h_node, c_node = zeros(1), zeros(1)

        for x in (1.0, -0.5, 2.0):
            i = sigmoid(0.5 * x + 0.1 * h)
            f = sigmoid(-0.3 * x + 0.2 * h + 1.0)
            o = sigmoid(0.8 * x - 0.4 * h + 0.1)
            g = math.tanh(1.2 * x + 0.6 * h - 0.2)
            c = f * c + i * g
            h = o * math.tanh(c)

            h_node, c_node = lstm_step(params, constant([x]), h_node, c_node)

            assert h_node.scalar() == pytest.approx(h, abs=1e-12)
            assert c_node.scalar() == pytest.approx(c, abs=1e-12)

    def test_state_dimension_error(self):
        params = LSTMParams.create("lstm", 2, 3)

        with pytest.raises(DimensionError):
            lstm_step(params, constant([0.0, 0.0]), zeros(2), zeros(3))

    def test_gradients(self, numeric_gradient):
        params = LSTMParams.create("lstm", 2, 2, np.random.default_rng(4))
        params.bias.assign(np.random.default_rng(5).normal(size=8))
        x = constant([0.4, -0.9])

        def loss():
            h, c = lstm_step(params, x, constant([0.2, -0.1]),
                             constant([0.5, 0.3]))
            return total(elementwise_mul(h, h))

        backward(loss())
        analytic = [p.grad.copy() for p in params.parameters()]

        numeric = numeric_gradient(lambda: loss().scalar(),
                                   [p.value for p in params.parameters()])

        for a, (n, _) in zip(analytic, numeric):
            np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-8)


class TestBiLSTM:

    @pytest.fixture
    def layers(self):
        rng = np.random.default_rng(6)
        return [
            (LSTMParams.create("l0.fwd", 3, 2, rng),
             LSTMParams.create("l0.bwd", 3, 2, rng)),
            (LSTMParams.create("l1.fwd", 4, 2, rng),
             LSTMParams.create("l1.bwd", 4, 2, rng))
        ]

    def test_length_and_dimension(self, layers):
        inputs = sequence(np.random.default_rng(0), 5, 3)

        out = bilstm_transduce(layers, inputs)

        assert len(out) == 5
        assert all(v.shape == (4,) for v in out)

    def test_single_element(self, layers):
        fwd, bwd = layers[0]
        x = constant([0.1, 0.2, 0.3])

        out, = bilstm_transduce(layers[:1], [x])
        hf, _ = lstm_step(fwd, x, zeros(2), zeros(2))
        hb, _ = lstm_step(bwd, x, zeros(2), zeros(2))

        np.testing.assert_allclose(out.value, np.concatenate([hf.value,
                                                              hb.value]))

    def test_palindrome_with_shared_directions(self, layers):
        fwd = layers[0][0]
        a, b, c = sequence(np.random.default_rng(1), 3, 3)

        out = bilstm_transduce([(fwd, fwd)], [a, b, c, b, a])

        for i in range(5):
            mirrored = out[4 - i].value
            np.testing.assert_allclose(out[i].value,
                                       np.concatenate([mirrored[2:],
                                                       mirrored[:2]]))

    def test_empty_sequence(self, layers):
        with pytest.raises(ContractError):
            bilstm_transduce(layers, [])

    def test_final_state_dimension(self, layers):
        fwd, bwd = layers[0]
        rng = np.random.default_rng(2)

        for length in (1, 5):
            assert bilstm_final(fwd, bwd,
                                sequence(rng, length, 3)).shape == (4,)

    def test_final_state_is_order_sensitive(self, layers):
        fwd, bwd = layers[0]
        a, b = sequence(np.random.default_rng(3), 2, 3)

        ab = bilstm_final(fwd, bwd, [a, b]).value
        ba = bilstm_final(fwd, bwd, [b, a]).value

        assert not np.allclose(ab, ba)

    def test_final_state_of_empty_sequence(self, layers):
        with pytest.raises(ContractError):
            bilstm_final(*layers[0], [])


class TestMLP:

    def test_zero_weights_give_output_bias(self):
        params = MLPParams.create("mlp", 4, 3, 2)
        params.b2.assign(np.array([1.5, -0.5]))

        out = mlp_apply(params, constant([1.0, 2.0, 3.0, 4.0]))

        np.testing.assert_array_equal(out.value, [1.5, -0.5])

    def test_scalar_output(self):
        params = MLPParams.create("arc", 4, 3, 1, np.random.default_rng(0))
        assert mlp_apply(params, constant(np.ones(4))).shape == (1,)

    def test_input_dimension(self):
        params = MLPParams.create("mlp", 4, 3, 2)

        with pytest.raises(DimensionError):
            mlp_apply(params, constant([1.0]))

    def test_gradients(self, numeric_gradient):
        params = MLPParams.create("mlp", 4, 3, 2, np.random.default_rng(8))
        x = constant(np.random.default_rng(9).normal(size=4))

        def loss():
            return neg_log_softmax(mlp_apply(params, x), 1)

        backward(loss())
        analytic = [p.grad.copy() for p in params.parameters()]

        numeric = numeric_gradient(lambda: loss().scalar(),
                                   [p.value for p in params.parameters()])

        for a, (n, _) in zip(analytic, numeric):
            np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-8)


def test_glorot_bounds():
    values = glorot_uniform(np.random.default_rng(0), (30, 20))
    assert np.abs(values).max() <= math.sqrt(6.0 / 50)
    assert values.shape == (30, 20)
