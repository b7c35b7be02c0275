"""Learning with logical constraints for joint entity-relation extraction."""

__version__ = "0.1.0"
