"""Audio I/O, the synthetic vowel corpus, manifests and on-disk stores."""
