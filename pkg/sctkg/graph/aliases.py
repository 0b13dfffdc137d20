import json
import logging
import os
from typing import TYPE_CHECKING, Callable, Dict, Mapping, Optional, Union

from sctkg.core.composite import semantic_tag

if TYPE_CHECKING:
    from sctkg.graph.store import GraphStore

logger = logging.getLogger(__name__)

# Clinical aliases for relationship type concepts.
DEFAULT_ALIASES: Dict[int, str] = {
    246075003: "caused by",
    410662002: "treats",
    116680003: "Is a",
    363698007: "Finding site",
}


class AliasTable:
    """Human-readable names for relationship types, with lookups that fall back to the graph."""

    def __init__(self, aliases: Optional[Mapping[int, str]] = None):
        self._aliases = dict(DEFAULT_ALIASES if aliases is None else aliases)

    @classmethod
    def from_file(cls, path: Union[str, os.PathLike], extend_defaults: bool = True) -> "AliasTable":
        """Loads ``{"<type id>": "<alias>", ...}`` from a JSON file.

        :param extend_defaults: Keep the built-in aliases, with file entries overriding them
        """
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ValueError(f"Alias file {path} must hold a JSON object, got {type(raw).__name__}")
        loaded = {}
        for key, value in raw.items():
            if not str(key).isdigit() or not isinstance(value, str) or not value.strip():
                raise ValueError(f"Alias file {path}: bad entry {key!r}: {value!r}")
            loaded[int(key)] = value
        aliases = {**DEFAULT_ALIASES, **loaded} if extend_defaults else loaded
        logger.debug("Loaded %d aliases from %s", len(loaded), path)
        return cls(aliases)

    def get(self, type_id: int) -> Optional[str]:
        return self._aliases.get(type_id)

    def __contains__(self, type_id: int) -> bool:
        return type_id in self._aliases

    def as_dict(self) -> Dict[int, str]:
        return dict(self._aliases)

    def edge_type_name(self, type_id: int, fsn_term: Optional[str] = None) -> str:
        """Name stored on edges: the type concept's FSN term, else the alias, else the id."""
        if fsn_term and fsn_term != str(type_id):
            return fsn_term
        return self._aliases.get(type_id, str(type_id))

    def link_name(
        self,
        type_id: int,
        store: Optional["GraphStore"] = None,
        fallback: Optional[str] = None,
    ) -> str:
        """Name shown in rendered paths: the alias, else the type concept's name, else
        ``fallback``, else the id."""
        alias = self._aliases.get(type_id)
        if alias is not None:
            return alias
        if store is not None and store.has_node(type_id):
            node = store.get_node(type_id)
            if not node.placeholder:
                return node.name
        return fallback if fallback else str(type_id)

    def resolver(
        self,
        store: Optional["GraphStore"] = None,
        fsn_terms: Optional[Mapping[int, str]] = None,
    ) -> Callable[[int], str]:
        """A ``type_id -> type_name`` function for :py:meth:`GraphStore.add_edge`, looking the
        type concept up in ``fsn_terms`` first and then among the store's non-placeholder nodes."""

        def resolve(type_id: int) -> str:
            term = None
            if fsn_terms is not None and type_id in fsn_terms:
                term = semantic_tag(fsn_terms[type_id])[0]
            elif store is not None and store.has_node(type_id):
                node = store.get_node(type_id)
                if not node.placeholder:
                    term = node.name
            return self.edge_type_name(type_id, term)

        return resolve
