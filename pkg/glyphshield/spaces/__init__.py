"""
Character embedding spaces and neighbor search.

Plain meaning: Ways of deciding which characters look alike.
"""

from glyphshield.spaces.dces import dces_key, dces_neighbors, dces_space
from glyphshield.spaces.i2ces import build_i2ces, i2ces_vector
from glyphshield.spaces.ices import build_ices, ices_vector
from glyphshield.spaces.models import (
    EmbeddingSpace,
    NeighborSet,
    SpaceBuildMeta,
    load_neighbor_sets,
    save_neighbor_sets,
)
from glyphshield.spaces.names import (
    NamesTable,
    fetch_names_list,
    names_table_from_unicodedata,
    parse_names_list,
)
from glyphshield.spaces.search import cosine, neighbor_sets, top_k

__all__ = [
    "EmbeddingSpace",
    "NamesTable",
    "NeighborSet",
    "SpaceBuildMeta",
    "build_i2ces",
    "build_ices",
    "cosine",
    "dces_key",
    "dces_neighbors",
    "dces_space",
    "fetch_names_list",
    "i2ces_vector",
    "ices_vector",
    "load_neighbor_sets",
    "names_table_from_unicodedata",
    "neighbor_sets",
    "parse_names_list",
    "save_neighbor_sets",
    "top_k",
]
