import numpy as np
import pytest

from jptdp import *

SAMPLE = (
    "# sent_id = 1\n"
    "# text = He runs.\n"
    "1\tHe\the\tPRON\tPRP\tCase=Nom\t2\tnsubj\t_\t_\n"
    "2\truns\trun\tVERB\tVBZ\t_\t0\troot\t_\tSpaceAfter=No\n"
    "3\t.\t.\tPUNCT\t.\t_\t2\tpunct\t_\t_\n"
    "\n"
    "# sent_id = 2\n"
    "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "1\tdo\tdo\tAUX\tVBP\t_\t3\taux\t_\t_\n"
    "2\tn't\tnot\tPART\tRB\t_\t3\tadvmod\t_\t_\n"
    "3\tgo\tgo\tVERB\tVB\t_\t0\troot\t_\tSpaceAfter=No\n"
    "4\t!\t!\tPUNCT\t.\t_\t3\tpunct\t_\t_\n"
    "\n"
)


@pytest.fixture
def sample_text():
    return SAMPLE


LEXICON = {
    "DET": ["the", "a", "this"],
    "NOUN": ["dog", "cat", "bird", "fish"],
    "VERB": ["runs", "sees", "eats"],
    "ADJ": ["big", "red"],
    "ADV": ["fast", "today"],
    "PRON": ["he", "she"],
    "PUNCT": [".", "!"]
}

TEMPLATES = [
    (["DET", "NOUN", "VERB", "PUNCT"],
     [2, 3, 0, 3],
     ["det", "nsubj", "root", "punct"]),
    (["PRON", "VERB", "DET", "NOUN", "PUNCT"],
     [2, 0, 4, 2, 2],
     ["nsubj", "root", "det", "obj", "punct"]),
    (["DET", "ADJ", "NOUN", "VERB", "ADV", "PUNCT"],
     [3, 3, 4, 0, 4, 4],
     ["det", "amod", "nsubj", "root", "advmod", "punct"])
]


@pytest.fixture
def synthetic_treebank():
    """Projective sentences drawn from a few fixed templates"""

    def generate(count, seed=0):
        rng = np.random.default_rng(seed)
        sentences = []

        for _ in range(count):
            tags, heads, rels = TEMPLATES[rng.integers(len(TEMPLATES))]
            tokens = [
                Token(id=i, form=str(rng.choice(LEXICON[tag])), upos=tag,
                      head=head, deprel=rel)
                for i, (tag, head, rel) in enumerate(zip(tags, heads, rels),
                                                     start=1)
            ]
            sentences.append(Sentence(tokens=tokens))

        return Treebank(sentences)

    return generate


@pytest.fixture
def treebank():
    return parse_conllu(SAMPLE, "sample.conllu")


@pytest.fixture
def sample_file(tmp_path):
    path = tmp_path / "sample.conllu"
    path.write_bytes(SAMPLE.encode("utf-8"))
    return str(path)


@pytest.fixture
def tiny_hyper():
    return Hyperparams(char_dim=3, word_dim=4, ctx_state_dim=5, ctx_layers=2,
                       mlp_hidden=6, char_state_dim=3, epochs=2)


@pytest.fixture
def model(treebank, tiny_hyper):
    return ModelParams.create(build_vocab(treebank), tiny_hyper,
                              np.random.default_rng(7))


@pytest.fixture
def numeric_gradient():
    """Central finite differences of a scalar function of numpy arrays"""

    def compute(f, arrays, eps=1e-5, elements=None):
        gradients = []

        for array in arrays:
            grad = np.zeros_like(array)

            indices = list(np.ndindex(array.shape))
            if elements is not None and len(indices) > elements:
                picked = np.random.default_rng(0).choice(len(indices),
                                                         elements,
                                                         replace=False)
                indices = [indices[i] for i in picked]

            for index in indices:
                saved = array[index]

                array[index] = saved + eps
                upper = f()
                array[index] = saved - eps
                lower = f()
                array[index] = saved

                grad[index] = (upper - lower) / (2 * eps)

            gradients.append((grad, indices))

        return gradients

    return compute
