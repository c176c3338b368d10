"""Synthetic confounded corpus for cross-domain experiments.

Every document carries two kinds of signal:

* variety markers -- real EP/BP lexical pairs (autocarro/ônibus, ...) that
  are genuinely predictive of the label everywhere;
* entity names -- gazetteer-covered tokens whose label association is
  strong *within* each domain but flipped between the first domain and all
  the others, so a classifier that latches onto entities transfers badly.

Training on the first domain with entities unmasked therefore looks great
in-domain and falls apart out-of-domain; masking entities during training
(p_ner = 1) removes the trap. The generator also emits FRMT-style paired
documents sharing identical entities and differing only in the variety
markers, which stress entity-reliant models into labeling both sides the
same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from varid.corpus import Document, Domain, Label
from varid.evaluation import Pair
from varid.lexicon import NER, Lexicon
from varid.tagging import TaggedToken, tag_documents
from varid.util import keyed_rng

MARKER_PAIRS: tuple[tuple[str, str], ...] = (
    ("autocarro", "ônibus"),
    ("comboio", "trem"),
    ("equipa", "equipe"),
    ("golo", "gol"),
    ("ecrã", "tela"),
    ("telemóvel", "celular"),
    ("frigorífico", "geladeira"),
    ("sumo", "suco"),
    ("rebuçado", "bala"),
    ("peão", "pedestre"),
    ("passadeira", "faixa"),
    ("berma", "acostamento"),
    ("camisola", "blusa"),
    ("sanita", "privada"),
    ("travão", "freio"),
    ("gelado", "sorvete"),
    ("propina", "mensalidade"),
    ("montra", "vitrine"),
    ("talho", "açougue"),
    ("bilheteira", "bilheteria"),
    ("hospedeira", "aeromoça"),
    ("registo", "registro"),
    ("facto", "fato"),
    ("camião", "caminhão"),
    ("relvado", "gramado"),
    ("sandes", "sanduíche"),
)

PERSON_NAMES = (
    "Tavares", "Cardoso", "Moreira", "Barbosa", "Teixeira", "Azevedo",
    "Fonseca", "Machado", "Vasconcelos", "Henriques", "Siqueira", "Peixoto",
    "Drummond", "Quaresma", "Bandeira", "Saramago",
)

CITY_NAMES = (
    "Abrantes", "Bragança", "Viseu", "Tomar", "Leiria", "Sintra",
    "Niterói", "Curitiba", "Uberlândia", "Sorocaba", "Petrópolis",
    "Maringá", "Chaves", "Lamego", "Macaé", "Ilhéus",
)

_FILLER = """casa tempo dia ano pessoa cidade governo trabalho vida mundo
    parte lugar coisa momento forma grupo caso semana hora problema projeto
    serviço mercado empresa estado país região programa processo sistema
    valor área número história palavra livro jornal filme música escola
    universidade estudo professor aluno hospital rua praça jardim porta
    janela mesa viagem festa jogo reunião decisão resultado relatório
    documento notícia""".split()

_FUNCTION = """o a os as de em que não com uma para é foi mas como mais por
    se do da no na ao à os seu sua este esta são tem já muito bem quando
    entre sobre depois ainda também onde durante""".split()

DEFAULT_DOMAINS = (
    Domain.WEB,
    Domain.JOURNALISTIC,
    Domain.LEGAL,
    Domain.SOCIAL_MEDIA,
)

_ENTITY_FIDELITY = 0.95
_MARKER_PRESENCE = 0.85


@dataclass
class ConfoundedCorpus:
    """Generated documents, their tags, and the paired evaluation bucket."""

    documents: list[Document]
    tags: dict[str, list[TaggedToken]]
    lexicon: Lexicon
    pairs: list[Pair]
    pair_documents: list[Document]
    seed: int
    entities: tuple[str, ...] = field(default_factory=tuple)


def _entity_pools(domain_index: int) -> tuple[list[str], list[str]]:
    """(EP-affine, BP-affine) entity names for one domain.

    The base assignment alternates over the joint entity list; every domain
    after the first flips it, making entities anti-predictive relative to a
    model trained on domain 0.
    """
    entities = _all_entities()
    ep_pool, bp_pool = [], []
    for i, name in enumerate(entities):
        base_is_ep = i % 2 == 0
        is_ep = base_is_ep if domain_index == 0 else not base_is_ep
        (ep_pool if is_ep else bp_pool).append(name)
    return ep_pool, bp_pool


def _all_entities() -> tuple[str, ...]:
    return PERSON_NAMES + CITY_NAMES


def synth_lexicon() -> Lexicon:
    ner_entries: dict[str, NER] = {name: NER.PERSON for name in PERSON_NAMES}
    ner_entries.update({name: NER.LOCATION for name in CITY_NAMES})
    return Lexicon.builtin().with_entries(ner_entries=ner_entries)


def _document_tokens(rng, label: Label, ep_pool, bp_pool) -> list[str]:
    own_pool, other_pool = (ep_pool, bp_pool) if label is Label.EP else (bp_pool, ep_pool)
    marker_column = 0 if label is Label.EP else 1

    words: list[str] = []
    n_filler = int(rng.integers(14, 26))
    for _ in range(n_filler):
        pool = _FUNCTION if rng.random() < 0.55 else _FILLER
        words.append(pool[int(rng.integers(0, len(pool)))])
    n_entities = int(rng.integers(2, 5))
    for _ in range(n_entities):
        pool = own_pool if rng.random() < _ENTITY_FIDELITY else other_pool
        words.append(pool[int(rng.integers(0, len(pool)))])
    for _ in range(2):
        if rng.random() < _MARKER_PRESENCE:
            pair = MARKER_PAIRS[int(rng.integers(0, len(MARKER_PAIRS)))]
            words.append(pair[marker_column])
    order = rng.permutation(len(words))
    return [words[i] for i in order]


def build_confounded_corpus(
    seed: int = 20240,
    domains: tuple[Domain, ...] = DEFAULT_DOMAINS,
    docs_per_domain: int = 2000,
    n_pairs: int = 400,
) -> ConfoundedCorpus:
    """Deterministic confounded corpus: docs_per_domain documents per domain
    (half EP, half BP), plus n_pairs entity-bucket pairs."""
    lexicon = synth_lexicon()
    documents: list[Document] = []
    per_label = docs_per_domain // 2
    for d_index, domain in enumerate(domains):
        ep_pool, bp_pool = _entity_pools(d_index)
        for label in (Label.EP, Label.BP):
            for i in range(per_label):
                doc_id = f"{domain.value.lower()}-{label.value.lower()}-{i:05d}"
                rng = keyed_rng(seed, "synth-doc", domain.value, label.value, str(i))
                tokens = _document_tokens(rng, label, ep_pool, bp_pool)
                documents.append(
                    Document(
                        id=doc_id,
                        text=" ".join(tokens) + ".",
                        domain=domain,
                        label=label,
                    )
                )

    pair_documents: list[Document] = []
    pairs: list[Pair] = []
    entities = _all_entities()
    for i in range(n_pairs):
        rng = keyed_rng(seed, "synth-pair", str(i))
        # entities of one (base-)affinity bucket, so their pull does not cancel
        bucket_names = [entities[j] for j in range(len(entities)) if (j % 2 == 0) == (i % 2 == 0)]
        picks = [bucket_names[int(k)] for k in rng.integers(0, len(bucket_names), size=3)]
        shared = []
        for _ in range(10):
            pool = _FUNCTION if rng.random() < 0.5 else _FILLER
            shared.append(pool[int(rng.integers(0, len(pool)))])
        marker_indices = [int(k) for k in rng.integers(0, len(MARKER_PAIRS), size=2)]
        pair_id = f"entity-{i:05d}"
        for label, column in ((Label.EP, 0), (Label.BP, 1)):
            words = shared + picks + [MARKER_PAIRS[k][column] for k in marker_indices]
            order = rng.permutation(len(words))
            pair_documents.append(
                Document(
                    id=f"{pair_id}-{label.value}",
                    text=" ".join(words[j] for j in order) + ".",
                    domain=Domain.UNKNOWN,
                    label=label,
                )
            )
        pairs.append(
            Pair(pair_id=pair_id, bucket="entity",
                 ep_id=f"{pair_id}-EP", bp_id=f"{pair_id}-BP")
        )

    tags = tag_documents(documents, lexicon)
    return ConfoundedCorpus(
        documents=documents,
        tags=tags,
        lexicon=lexicon,
        pairs=pairs,
        pair_documents=pair_documents,
        seed=seed,
        entities=entities,
    )
