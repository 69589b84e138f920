EMPTY = "_"

# Pseudo-form whose characters build the ROOT character vector
ROOT_FORM = "*root*"

UNK_WORD_FORM = "<unk>"
ROOT_WORD_FORM = "<root>"
UNK_CHAR_FORM = "<unk>"

# UD v1.2 CONJ and UD v2 CCONJ are both accepted
UNIVERSAL_POS_TAGS = frozenset({
    "ADJ",
    "ADP",
    "ADV",
    "AUX",
    "CCONJ",
    "CONJ",
    "DET",
    "INTJ",
    "NOUN",
    "NUM",
    "PART",
    "PRON",
    "PROPN",
    "PUNCT",
    "SCONJ",
    "SYM",
    "VERB",
    "X"
})

PUNCT_TAGS = frozenset({
    "PUNCT"
})


__all__ = ("EMPTY", "ROOT_FORM", "UNK_WORD_FORM", "ROOT_WORD_FORM",
           "UNK_CHAR_FORM", "UNIVERSAL_POS_TAGS", "PUNCT_TAGS")
