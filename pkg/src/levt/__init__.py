"""Edit-based sequence generation: insertion/deletion policies learned by
imitating a Levenshtein-distance expert, decoded by iterative parallel
refinement."""

__version__ = "0.1.0"
