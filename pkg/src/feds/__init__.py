"""Fragmentation, selective encryption and dispersal of data."""

from .errors import FedsError
from .model import Chunk, FragmentMap, FragmentRecord, LevelPlanes, chunk_stream, unchunk

__version__ = "0.1.0"

__all__ = ["FedsError", "Chunk", "FragmentMap", "FragmentRecord", "LevelPlanes",
           "chunk_stream", "unchunk"]
