"""Built-in Portuguese lexicon for the rule tagger.

Closed-class word lists, suffix rules for open-class words, and a small
gazetteer of well-known entity names. Users extend or replace these with
``surface<TAB>tag`` files (one entry per line; tag is a POS or NER name).
The goal is a deterministic tagging surface for delexicalization, not
tagging accuracy; pre-tagged corpora are the fidelity escape hatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from varid.errors import InputFormatError


class POS(str, Enum):
    NOUN = "NOUN"
    PROPN = "PROPN"
    VERB = "VERB"
    ADJ = "ADJ"
    ADV = "ADV"
    PRON = "PRON"
    DET = "DET"
    ADP = "ADP"
    NUM = "NUM"
    CONJ = "CONJ"
    PUNCT = "PUNCT"
    OTHER = "OTHER"


class NER(str, Enum):
    NONE = "NONE"
    PERSON = "PERSON"
    LOCATION = "LOCATION"
    ORGANIZATION = "ORGANIZATION"
    MISC = "MISC"


_DETERMINERS = """o a os as um uma uns umas este esta estes estas esse essa
    esses essas aquele aquela aqueles aquelas meu minha meus minhas teu tua
    teus tuas seu sua seus suas nosso nossa nossos nossas vosso vossa vossos
    vossas cada qualquer todo toda todos todas outro outra outros outras
    vários várias ambos ambas tal tais""".split()

_ADPOSITIONS = """de em para com por sem sob sobre entre até desde contra
    após perante durante mediante do da dos das dum duma no na nos nas num
    numa nuns numas ao aos à às pelo pela pelos pelas deste desta destes
    destas desse dessa desses dessas daquele daquela daqueles daquelas disto
    disso daquilo neste nesta nestes nestas nesse nessa nesses nessas naquele
    naquela naqueles naquelas nisto nisso naquilo dele dela deles delas""".split()

_PRONOUNS = """eu tu ele ela nós vós eles elas você vocês me te se lhe lhes
    vos mim ti si comigo contigo consigo connosco conosco convosco quem isto
    isso aquilo alguém ninguém tudo nada algo qual quais cujo cuja cujos
    cujas""".split()

_CONJUNCTIONS = """e ou mas nem que porque pois porém contudo todavia
    entretanto portanto logo assim enquanto quando embora caso senão conforme
    como""".split()

_ADVERBS = """não sim já muito pouco mais menos bem mal hoje ontem amanhã
    aqui ali aí lá cá agora sempre nunca também só apenas ainda depois antes
    cedo tarde talvez quase demasiado bastante então onde""".split()

# Frequent irregular verb forms the suffix rules would miss.
_VERBS = """é são foi foram era eram fui serei ser sendo sido está estão
    estava estavam esteve estar estando estado tem têm tinha tinham teve ter
    tendo tido há havia houve haver vai vão ia iam foi ir indo ido vem vêm
    veio vinha vir vindo pode podem podia pôde poder faz fazem fez fazia
    fazer feito diz dizem disse dizia dizer dito dá dão deu dava dar dado
    quer querem quis queria querer sabe sabem soube sabia saber vê veem viu
    via ver visto põe põem pôs punha pôr posto""".split()

# Checked longest-first; first hit wins.
_SUFFIX_RULES: tuple[tuple[str, POS], ...] = (
    ("mente", POS.ADV),
    ("ções", POS.NOUN),
    ("ção", POS.NOUN),
    ("sões", POS.NOUN),
    ("são", POS.NOUN),
    ("dades", POS.NOUN),
    ("dade", POS.NOUN),
    ("agens", POS.NOUN),
    ("agem", POS.NOUN),
    ("ismos", POS.NOUN),
    ("ismo", POS.NOUN),
    ("mentos", POS.NOUN),
    ("mento", POS.NOUN),
    ("ências", POS.NOUN),
    ("ência", POS.NOUN),
    ("âncias", POS.NOUN),
    ("ância", POS.NOUN),
    ("íveis", POS.ADJ),
    ("ível", POS.ADJ),
    ("áveis", POS.ADJ),
    ("ável", POS.ADJ),
    ("osos", POS.ADJ),
    ("osas", POS.ADJ),
    ("oso", POS.ADJ),
    ("osa", POS.ADJ),
    ("icos", POS.ADJ),
    ("icas", POS.ADJ),
    ("ico", POS.ADJ),
    ("ica", POS.ADJ),
    ("ando", POS.VERB),
    ("endo", POS.VERB),
    ("indo", POS.VERB),
    ("aram", POS.VERB),
    ("eram", POS.VERB),
    ("iram", POS.VERB),
    ("avam", POS.VERB),
    ("ava", POS.VERB),
    ("emos", POS.VERB),
    ("amos", POS.VERB),
    ("ar", POS.VERB),
    ("er", POS.VERB),
    ("ir", POS.VERB),
    ("ou", POS.VERB),
    ("iu", POS.VERB),
    ("eu", POS.VERB),
)

_GAZETTEER: dict[str, NER] = {
    "João": NER.PERSON,
    "Maria": NER.PERSON,
    "José": NER.PERSON,
    "Ana": NER.PERSON,
    "António": NER.PERSON,
    "Antônio": NER.PERSON,
    "Pedro": NER.PERSON,
    "Paulo": NER.PERSON,
    "Silva": NER.PERSON,
    "Santos": NER.PERSON,
    "Lisboa": NER.LOCATION,
    "Porto": NER.LOCATION,
    "Coimbra": NER.LOCATION,
    "Braga": NER.LOCATION,
    "Brasília": NER.LOCATION,
    "São Paulo": NER.LOCATION,
    "Rio de Janeiro": NER.LOCATION,
    "Salvador": NER.LOCATION,
    "Portugal": NER.LOCATION,
    "Brasil": NER.LOCATION,
}


@dataclass
class Lexicon:
    """Word lists plus gazetteer driving the deterministic rule tagger."""

    pos: dict[str, POS] = field(default_factory=dict)
    gazetteer: dict[tuple[str, ...], NER] = field(default_factory=dict)
    suffix_rules: tuple[tuple[str, POS], ...] = _SUFFIX_RULES

    def __post_init__(self):
        # first-token index for greedy longest phrase matching
        self._phrase_starts: dict[str, list[tuple[tuple[str, ...], NER]]] = {}
        for phrase, tag in self.gazetteer.items():
            self._phrase_starts.setdefault(phrase[0], []).append((phrase, tag))
        for options in self._phrase_starts.values():
            options.sort(key=lambda item: -len(item[0]))

    @classmethod
    def builtin(cls) -> "Lexicon":
        pos: dict[str, POS] = {}
        for words, tag in (
            (_DETERMINERS, POS.DET),
            (_ADPOSITIONS, POS.ADP),
            (_PRONOUNS, POS.PRON),
            (_CONJUNCTIONS, POS.CONJ),
            (_ADVERBS, POS.ADV),
            (_VERBS, POS.VERB),
        ):
            for word in words:
                pos.setdefault(word, tag)  # earlier lists take precedence
        gaz = {_phrase_key(surface): tag for surface, tag in _GAZETTEER.items()}
        return cls(pos=pos, gazetteer=gaz)

    def with_entries(
        self,
        pos_entries: dict[str, POS] | None = None,
        ner_entries: dict[str, NER] | None = None,
    ) -> "Lexicon":
        pos = dict(self.pos)
        gaz = dict(self.gazetteer)
        for surface, tag in (pos_entries or {}).items():
            pos[surface.lower()] = tag
        for surface, tag in (ner_entries or {}).items():
            gaz[_phrase_key(surface)] = tag
        return Lexicon(pos=pos, gazetteer=gaz, suffix_rules=self.suffix_rules)

    def suffix_pos(self, word: str) -> POS | None:
        for suffix, tag in self.suffix_rules:
            if len(word) > len(suffix) and word.endswith(suffix):
                return tag
        return None


def _phrase_key(surface: str) -> tuple[str, ...]:
    return tuple(part.casefold() for part in surface.split())


def load_lexicon_file(path: str | Path) -> tuple[dict[str, POS], dict[str, NER]]:
    """Read a ``surface<TAB>tag`` file into (POS entries, NER entries)."""
    pos_entries: dict[str, POS] = {}
    ner_entries: dict[str, NER] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise InputFormatError(f"{path}: line {lineno}: expected surface<TAB>tag")
            surface, tag = fields[0].strip(), fields[1].strip()
            if not surface:
                raise InputFormatError(f"{path}: line {lineno}: empty surface")
            if tag in POS.__members__:
                pos_entries[surface] = POS[tag]
            elif tag in NER.__members__ and tag != "NONE":
                ner_entries[surface] = NER[tag]
            else:
                raise InputFormatError(
                    f"{path}: line {lineno}: unknown tag {tag!r}"
                )
    return pos_entries, ner_entries
