"""Gold-cluster construction from scored coreference pairs, plus a synthetic
benchmark generator with known ground truth.

Scored-pairs TSV: ``a \\t b \\t soft_truth``. Pairs at or above the threshold
become undirected edges; connected components of size >= 2 are the gold
clusters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .kg import (OpenKG, Triple, Vocabulary, clustering_from_groups,
                 Clustering)
from .phrases import WordVectors
from .side_info import SideInfoPair, dedupe_pairs


@dataclass(frozen=True)
class ScoredPair:
    a: str
    b: str
    soft_truth: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("scored pair must relate two distinct surface forms")
        if not 0.0 <= self.soft_truth <= 1.0:
            raise ValueError("soft truth must lie in [0, 1]")


def load_scored_pairs(path) -> list[ScoredPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").removesuffix("\r")
            if line == "":
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError("expected 3 tab-separated fields",
                                 path=path, line=lineno)
            try:
                pairs.append(ScoredPair(fields[0], fields[1], float(fields[2])))
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None
    return pairs


def gold_components(pairs: list[ScoredPair],
                    threshold: float = 0.25) -> list[list[str]]:
    """Connected components (size >= 2) of the pairs graph after dropping
    pairs scored below the threshold. Deterministic: components ordered by
    first appearance, members by first appearance."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    adj: dict[str, list[str]] = {}
    order: list[str] = []
    for p in pairs:
        if p.soft_truth < threshold:
            continue
        for u, v in ((p.a, p.b), (p.b, p.a)):
            if u not in adj:
                adj[u] = []
                order.append(u)
            adj[u].append(v)
    seen: set[str] = set()
    components: list[list[str]] = []
    for start in order:
        if start in seen:
            continue
        comp: list[str] = []
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        comp.sort(key=order.index)
        if len(comp) >= 2:
            components.append(comp)
    return components


def build_gold(pairs: list[ScoredPair], threshold: float = 0.25,
               kg: OpenKG | None = None):
    """Return (gold components, filtered KG or None). When a KG is supplied,
    only triples whose head or tail surface form sits in some gold cluster
    are retained, and the components come back as a Clustering over the
    filtered entity vocabulary."""
    components = gold_components(pairs, threshold)
    if kg is None:
        return components, None
    member_forms = {form for comp in components for form in comp}
    kept = [t for t in kg.triples
            if kg.entity_vocab.surface(t.head) in member_forms
            or kg.entity_vocab.surface(t.tail) in member_forms]
    if not kept:
        return components, None
    filtered = _rebuild_kg(kg, kept)
    groups = []
    for comp in components:
        group = [filtered.entity_vocab.lookup(f) for f in comp
                 if f in filtered.entity_vocab]
        if len(group) >= 2:
            groups.append(group)
    gold = clustering_from_groups(groups, len(filtered.entity_vocab), "entity")
    return components, (filtered, gold)


def _rebuild_kg(kg: OpenKG, kept: list[Triple]) -> OpenKG:
    ent_forms: list[str] = []
    ent_index: dict[str, int] = {}
    rel_forms: list[str] = []
    rel_index: dict[str, int] = {}

    def intern(forms, index, s):
        i = index.get(s)
        if i is None:
            i = len(forms)
            index[s] = i
            forms.append(s)
        return i

    triples = []
    for t in kept:
        h = intern(ent_forms, ent_index, kg.entity_vocab.surface(t.head))
        r = intern(rel_forms, rel_index, kg.relation_vocab.surface(t.rel))
        tl = intern(ent_forms, ent_index, kg.entity_vocab.surface(t.tail))
        triples.append(Triple(h, r, tl))
    return OpenKG(triples, Vocabulary(ent_forms), Vocabulary(rel_forms))


# ---------------------------------------------------------------------------
# synthetic benchmark

@dataclass(frozen=True)
class SynthConfig:
    num_entities: int = 20
    surface_forms_per_entity: int = 3
    num_relations: int = 10
    paraphrases_per_relation: int = 2
    num_triples: int = 600
    token_noise_prob: float = 0.1
    seed: int = 0
    vec_dim: int = 32  # width of the emitted word vectors

    def __post_init__(self):
        if min(self.num_entities, self.surface_forms_per_entity,
               self.num_relations, self.paraphrases_per_relation,
               self.num_triples, self.vec_dim) < 1:
            raise ValueError("all synthetic counts must be >= 1")
        if not 0.0 <= self.token_noise_prob <= 1.0:
            raise ValueError("token_noise_prob must lie in [0, 1]")


@dataclass
class SynthDataset:
    kg: OpenKG
    gold_entities: Clustering
    gold_relations: Clustering
    oracle_entity_pairs: list[SideInfoPair]
    oracle_relation_pairs: list[SideInfoPair]
    word_vectors: WordVectors


_FILLERS = ("of", "the", "inc", "group")


def _surface_forms(stem: str, count: int, noise_prob: float, rng) -> list[str]:
    """Forms share the stem; later forms append one distinct filler token and,
    with the noise probability, one extra filler."""
    forms = [stem]
    fillers = list(_FILLERS)
    for k in range(1, count):
        filler = fillers[(k - 1) % len(fillers)]
        tokens = [stem, filler]
        if rng.random() < noise_prob:
            tokens.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
        form = " ".join(tokens)
        if form in forms:
            form = form + " co"
        forms.append(form)
    return forms


def gen_synthetic(cfg: SynthConfig) -> SynthDataset:
    """Deterministic synthetic canonicalization benchmark. Every surface
    form appears in at least one triple, so gold clusters cover the
    vocabularies exactly."""
    rng = np.random.default_rng(cfg.seed)

    ent_forms = [_surface_forms(f"en{i:03d}q", cfg.surface_forms_per_entity,
                                cfg.token_noise_prob, rng)
                 for i in range(cfg.num_entities)]
    rel_forms = [_surface_forms(f"re{j:03d}q", cfg.paraphrases_per_relation,
                                cfg.token_noise_prob, rng)
                 for j in range(cfg.num_relations)]

    # word vectors: unit stems far apart, short shared fillers
    table: dict[str, np.ndarray] = {}

    def unit(v):
        return v / np.linalg.norm(v)

    for stem_list in (ent_forms, rel_forms):
        for forms in stem_list:
            stem = forms[0].split()[0]
            table[stem] = unit(rng.normal(size=cfg.vec_dim))
    for filler in _FILLERS + ("co",):
        table[filler] = 0.15 * unit(rng.normal(size=cfg.vec_dim))
    wv = WordVectors(cfg.vec_dim, table)

    # render triples from a latent graph; cover every form first
    flat_ents = [(i, f) for i, forms in enumerate(ent_forms) for f in forms]
    flat_rels = [(j, f) for j, forms in enumerate(rel_forms) for f in forms]
    raw: list[tuple[str, str, str]] = []

    def pick_ent(latent: int) -> str:
        forms = ent_forms[latent]
        return forms[int(rng.integers(len(forms)))]

    nslots = max(len(flat_ents) % 2 + len(flat_ents) // 2, len(flat_rels))
    if cfg.num_triples < nslots:
        raise ValueError(
            f"num_triples={cfg.num_triples} cannot cover all "
            f"{len(flat_ents)} entity and {len(flat_rels)} relation forms "
            f"(need >= {nslots})")
    ent_queue = [f for _, f in flat_ents]
    rel_queue = [f for _, f in flat_rels]
    for k in range(nslots):
        head = ent_queue[2 * k] if 2 * k < len(ent_queue) else pick_ent(
            int(rng.integers(cfg.num_entities)))
        tail = ent_queue[2 * k + 1] if 2 * k + 1 < len(ent_queue) else pick_ent(
            int(rng.integers(cfg.num_entities)))
        rel = rel_queue[k] if k < len(rel_queue) else rel_forms[
            int(rng.integers(cfg.num_relations))][0]
        raw.append((head, rel, tail))
    while len(raw) < cfg.num_triples:
        hi = int(rng.integers(cfg.num_entities))
        ti = int(rng.integers(cfg.num_entities))
        rj = int(rng.integers(cfg.num_relations))
        rel = rel_forms[rj][int(rng.integers(len(rel_forms[rj])))]
        raw.append((pick_ent(hi), rel, pick_ent(ti)))
    raw = raw[:cfg.num_triples]

    ent_vocab_forms: list[str] = []
    ent_index: dict[str, int] = {}
    rel_vocab_forms: list[str] = []
    rel_index: dict[str, int] = {}

    def intern(forms, index, s):
        i = index.get(s)
        if i is None:
            i = len(forms)
            index[s] = i
            forms.append(s)
        return i

    triples = [Triple(intern(ent_vocab_forms, ent_index, h),
                      intern(rel_vocab_forms, rel_index, r),
                      intern(ent_vocab_forms, ent_index, t))
               for h, r, t in raw]
    kg = OpenKG(triples, Vocabulary(ent_vocab_forms), Vocabulary(rel_vocab_forms))

    def gold_for(latent_forms, vocab, namespace):
        groups = [[vocab.lookup(f) for f in forms] for forms in latent_forms]
        return clustering_from_groups(groups, len(vocab), namespace)

    gold_e = gold_for(ent_forms, kg.entity_vocab, "entity")
    gold_r = gold_for(rel_forms, kg.relation_vocab, "relation")

    def oracle_pairs(latent_forms, vocab):
        pairs = []
        for forms in latent_forms:
            ids = [vocab.lookup(f) for f in forms]
            for x in range(len(ids)):
                for y in range(x + 1, len(ids)):
                    pairs.append(SideInfoPair(ids[x], ids[y], 1.0, "imported"))
        return dedupe_pairs(pairs)

    return SynthDataset(kg, gold_e, gold_r,
                        oracle_pairs(ent_forms, kg.entity_vocab),
                        oracle_pairs(rel_forms, kg.relation_vocab), wv)


def split_triples(kg: OpenKG, ratio: float, seed: int):
    """Random two-way split of the triple list (by index), deterministic
    per seed; returns two lists of surface-form triples."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(kg.triples))
    cut = int(round(ratio * len(kg.triples)))
    def render(idx):
        out = []
        for i in sorted(int(j) for j in idx):
            t = kg.triples[i]
            out.append((kg.entity_vocab.surface(t.head),
                        kg.relation_vocab.surface(t.rel),
                        kg.entity_vocab.surface(t.tail)))
        return out
    return render(perm[:cut]), render(perm[cut:])
