"""crowdseg: measure segmentation diversity, predict image ambiguity, and
spend an annotation-redundancy budget on the images that need it."""

__version__ = "0.1.0"
