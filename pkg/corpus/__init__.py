"""Synthetic conversation world: lexicon, conversations, speech, mixing, storage."""
