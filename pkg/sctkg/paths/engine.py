"""Knowledge paths: chains of concepts joined by typed edges, found from seed concepts matched in
clinical text and rendered for prompt injection.

Rendering uses `` → `` between elements, e.g. ``cough → pneumonia → chest X-ray → antibiotics``
(concepts only) or ``Streptococcal infection → causes → Pharyngitis`` (with relations).
"""
import dataclasses
import logging
import re
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

from sctkg.graph.aliases import AliasTable
from sctkg.graph.store import GraphStore

logger = logging.getLogger(__name__)

ARROW = " → "
RenderMode = Literal["concepts-only", "with-relations"]
RENDER_MODES = ("concepts-only", "with-relations")

DEFAULT_MAX_PATHS = 3
DEFAULT_MAX_DEPTH = 4

_WORD = re.compile(r"\w+|[^\w\s]")


@dataclasses.dataclass(frozen=True)
class KnowledgePath:
    hops: Tuple[Tuple[int, str], ...]
    links: Tuple[Tuple[int, str], ...]

    def __post_init__(self):
        if len(self.links) != len(self.hops) - 1:
            raise ValueError(
                f"A path with {len(self.hops)} hops needs {len(self.hops) - 1} links, "
                f"got {len(self.links)}."
            )

    @property
    def concept_ids(self) -> Tuple[int, ...]:
        return tuple(concept_id for concept_id, _ in self.hops)

    @property
    def type_ids(self) -> Tuple[int, ...]:
        return tuple(type_id for type_id, _ in self.links)

    def to_dict(self, mode: RenderMode = "with-relations") -> dict:
        return {
            "concepts": [{"concept_id": cid, "name": name} for cid, name in self.hops],
            "relations": [{"type_id": tid, "alias": alias} for tid, alias in self.links],
            "rendered": render_path(self, mode),
        }


@dataclasses.dataclass(frozen=True)
class KnowledgeVector:
    paths: Tuple[KnowledgePath, ...]
    seed_terms: Tuple[str, ...]

    def render(self, mode: RenderMode = "concepts-only") -> List[str]:
        return [render_path(path, mode) for path in self.paths]


def _normalize(text: str) -> str:
    return " ".join(_WORD.findall(text.lower()))


class SeedMatcher:
    """Lexicon of node names and synonyms for longest-match lookup. A term shared by several
    concepts maps to the smallest concept id."""

    def __init__(self, store: GraphStore):
        self.lexicon: dict[str, int] = {}
        for node in store.nodes():
            if node.placeholder:
                continue
            for term in (node.name, *node.synonyms):
                key = _normalize(term)
                if key and (key not in self.lexicon or node.concept_id < self.lexicon[key]):
                    self.lexicon[key] = node.concept_id
        self.max_words = max((len(k.split(" ")) for k in self.lexicon), default=0)

    def match(self, clinical_text: str) -> List[Tuple[str, int]]:
        if not clinical_text.strip():
            raise ValueError("clinical_text must be non-empty")
        tokens = [(m.group().lower(), m.start(), m.end()) for m in _WORD.finditer(clinical_text)]
        candidates = []
        for start in range(len(tokens)):
            for width in range(min(self.max_words, len(tokens) - start), 0, -1):
                key = " ".join(t[0] for t in tokens[start : start + width])
                concept_id = self.lexicon.get(key)
                if concept_id is not None:
                    candidates.append((tokens[start][1], tokens[start + width - 1][2], concept_id))
                    break
        # longest first, then leftmost; a candidate overlapping an accepted one is dropped
        candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0]))
        accepted = []
        for begin, end, concept_id in candidates:
            if all(end <= a_begin or begin >= a_end for a_begin, a_end, _ in accepted):
                accepted.append((begin, end, concept_id))
        accepted.sort()
        return [(clinical_text[begin:end], concept_id) for begin, end, concept_id in accepted]


def match_seeds(store: GraphStore, clinical_text: str) -> List[Tuple[str, int]]:
    """Case-insensitive, whole-word, longest-match lookup of node names and synonyms.

    .. code-block:: python

        match_seeds(store, "Patient reports chest pain")  # [("chest pain", 29857009)]

    :return: ``(matched text span, concept_id)`` in text order
    """
    return SeedMatcher(store).match(clinical_text)


def find_paths(
    store: GraphStore,
    seeds: Sequence[int],
    type_filter: Optional[Iterable[int]] = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_paths: int = DEFAULT_MAX_PATHS,
    aliases: Optional[AliasTable] = None,
) -> List[KnowledgePath]:
    """Enumerates simple forward paths from each seed, breadth first.

    A path is reported when it cannot be extended: it reached ``max_depth`` edges or its last
    concept has no unvisited successor. Paths come in seed order, then by length, then by
    concept id sequence (then type id sequence); the list is cut at ``max_paths``.

    :param seeds: Concept ids to start from; repeats are ignored
    :param type_filter: Only follow edges of these type ids
    :param aliases: Names for the links, falling back to the type concept's name
    """
    if max_depth < 1 or max_paths < 1:
        raise ValueError(f"max_depth and max_paths must be >= 1, got {max_depth} and {max_paths}")
    aliases = aliases if aliases is not None else AliasTable()
    allowed = set(type_filter) if type_filter is not None else None
    names: dict[int, str] = {}
    link_names: dict[int, str] = {}

    def name_of(concept_id: int) -> str:
        if concept_id not in names:
            names[concept_id] = store.get_node(concept_id).name
        return names[concept_id]

    def link_of(type_id: int, type_name: str) -> str:
        if type_id not in link_names:
            link_names[type_id] = aliases.link_name(type_id, store, fallback=type_name)
        return link_names[type_id]

    results: List[KnowledgePath] = []
    seen_seeds = set()
    for seed in seeds:
        if seed in seen_seeds or not store.has_node(seed):
            continue
        seen_seeds.add(seed)
        # each entry: (concept ids, type ids, type names)
        frontier = [((seed,), (), ())]
        for depth in range(1, max_depth + 1):
            next_frontier = []
            finished = []
            for concept_ids, type_ids, type_names in frontier:
                extended = False
                for edge in store.out_edges(concept_ids[-1]):
                    if allowed is not None and edge.type_id not in allowed:
                        continue
                    if edge.destination_id in concept_ids:
                        continue
                    extended = True
                    next_frontier.append(
                        (
                            concept_ids + (edge.destination_id,),
                            type_ids + (edge.type_id,),
                            type_names + (edge.type_name,),
                        )
                    )
                if not extended and depth > 1:
                    finished.append((concept_ids, type_ids, type_names))
            if depth == max_depth:
                finished.extend(next_frontier)
                next_frontier = []
            finished.sort(key=lambda p: (len(p[0]), p[0], p[1]))
            for concept_ids, type_ids, type_names in finished:
                results.append(
                    KnowledgePath(
                        hops=tuple((cid, name_of(cid)) for cid in concept_ids),
                        links=tuple((t, link_of(t, n)) for t, n in zip(type_ids, type_names)),
                    )
                )
                if len(results) >= max_paths:
                    return results
            frontier = sorted(next_frontier, key=lambda p: (p[0], p[1]))
            if not frontier:
                break
    return results


def render_path(path: KnowledgePath, mode: RenderMode = "concepts-only") -> str:
    if mode == "concepts-only":
        return ARROW.join(name for _, name in path.hops)
    if mode == "with-relations":
        parts = [path.hops[0][1]]
        for (_, alias), (_, name) in zip(path.links, path.hops[1:]):
            parts.extend((alias, name))
        return ARROW.join(parts)
    raise ValueError(f"Unknown render mode {mode!r}. Expected one of {RENDER_MODES}.")


def parse_rendered_path(
    store: GraphStore, rendered: str, aliases: Optional[AliasTable] = None
) -> KnowledgePath:
    """Recovers a path from its with-relations rendering by walking the store.

    When names are ambiguous the candidates are tried in ascending concept id order and the first
    one that walks the whole text wins.

    :raises ValueError: if no stored path renders to ``rendered``
    """
    aliases = aliases if aliases is not None else AliasTable()
    parts = rendered.split(ARROW)
    if len(parts) % 2 == 0:
        raise ValueError(f"Expected alternating concepts and relations, got {len(parts)} parts.")
    concept_names, link_texts = parts[0::2], parts[1::2]
    starts = sorted(n.concept_id for n in store.nodes() if n.name == concept_names[0])

    def walk(
        prefix: Tuple[int, ...], links: Tuple[Tuple[int, str], ...]
    ) -> Optional[KnowledgePath]:
        step = len(links)
        if step == len(link_texts):
            return KnowledgePath(
                tuple((cid, name) for cid, name in zip(prefix, concept_names)), links
            )
        for edge in store.out_edges(prefix[-1]):
            if edge.destination_id in prefix:
                continue
            link = aliases.link_name(edge.type_id, store, fallback=edge.type_name)
            if link != link_texts[step]:
                continue
            if store.get_node(edge.destination_id).name != concept_names[step + 1]:
                continue
            found = walk(prefix + (edge.destination_id,), links + ((edge.type_id, link),))
            if found is not None:
                return found
        return None

    for start in starts:
        found = walk((start,), ())
        if found is not None:
            return found
    raise ValueError(f"No stored path renders as {rendered!r}")


def build_knowledge_vector(
    store: GraphStore,
    clinical_text: str,
    max_paths: int = DEFAULT_MAX_PATHS,
    max_depth: int = DEFAULT_MAX_DEPTH,
    type_filter: Optional[Iterable[int]] = None,
    aliases: Optional[AliasTable] = None,
) -> KnowledgeVector:
    """Matches seeds in the text and collects at most ``max_paths`` paths from them."""
    seeds = match_seeds(store, clinical_text)
    paths = find_paths(
        store,
        [concept_id for _, concept_id in seeds],
        type_filter=type_filter,
        max_depth=max_depth,
        max_paths=max_paths,
        aliases=aliases,
    )
    logger.debug("Matched %d seeds, found %d paths", len(seeds), len(paths))
    return KnowledgeVector(tuple(paths), tuple(span for span, _ in seeds))
