"""modaudit: turn screen recordings of in-game chat into an anonymized,
moderation-annotated text corpus, pre-filter it with a local LLM, and drive
a saturation-based human review workflow."""

__version__ = "0.1.0"
