"""Reference scorer server speaking the errlens wire protocol."""

from .app import create_app
from .config import ServerConfig
from .model import InvalidRequestError, Seq2SeqScorer

__all__ = ["ServerConfig", "Seq2SeqScorer", "InvalidRequestError", "create_app"]

__version__ = "0.1.0"
