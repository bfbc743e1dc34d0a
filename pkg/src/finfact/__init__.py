"""finfact: event-based multilingual financial news aggregation.

Articles from multiple sources and languages are ingested into an
append-only store, translated into a common English pivot, clustered
into cross-lingual events, indexed for hashtag+content search, and
scored for credibility by a small adversarially trained transformer.
"""

__version__ = "0.1.0"
