"""rilearn: reactive islands of the Hénon-Heiles escape problem, computed and learned."""

__version__ = "0.1.0"
