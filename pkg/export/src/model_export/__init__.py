"""model-export: bridge pretrained encoders into consumable artifacts.

Exports a bidirectional encoder plus its tokenizer into an open
interchange format with all hidden layers exposed, or pre-generates
layered embedding dumps for a word/sentence list so downstream analysis
never needs live inference.
"""

__version__ = "0.1.0"

from .export import ExportError, ExportSpec, export_model, generate_dump

__all__ = ["ExportError", "ExportSpec", "export_model", "generate_dump"]
