from .checkpoint_format import Checkpoint, load_checkpoint, save_checkpoint
from .eseq_format import EmbeddingSequenceFile, read_eseq, write_eseq
from .strategy_loader import load_sequences

__all__ = [
    "Checkpoint",
    "EmbeddingSequenceFile",
    "load_checkpoint",
    "load_sequences",
    "read_eseq",
    "save_checkpoint",
    "write_eseq",
]
