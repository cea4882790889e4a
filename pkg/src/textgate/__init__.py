"""textgate: confidence-gated scene-text pipeline engine.

Localizes candidate text blocks from binary segmentation masks, scores
recognition candidates against a scene description (semantic + lexical), and
routes each block either to a confident emit or to a heavyweight fallback
recognizer. Ships a deterministic replay backend, an evaluation harness, a
FastAPI service, and a thin-client CLI.
"""

__version__ = "0.1.0"
