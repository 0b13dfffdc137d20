from sctkg.paths.engine import (
    KnowledgePath,
    KnowledgeVector,
    build_knowledge_vector,
    find_paths,
    match_seeds,
    parse_rendered_path,
    render_path,
)

__all__ = [
    "build_knowledge_vector",
    "find_paths",
    "KnowledgePath",
    "KnowledgeVector",
    "match_seeds",
    "parse_rendered_path",
    "render_path",
]
