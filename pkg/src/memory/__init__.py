"""Second layer: episode store and compensation table"""

from memory.emotional_memory import CompensationTable, EpisodeRecord, EpisodeStore, TABLE_COLUMNS

__all__ = ['CompensationTable', 'EpisodeRecord', 'EpisodeStore', 'TABLE_COLUMNS']
