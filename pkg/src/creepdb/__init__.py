"""creepdb: literature mining pipeline for creep curves and constitutive models.

Converts bundles of pre-extracted document content (text pages, figure
images, metadata) into a relational database of digitized creep curves
paired with unit-checked constitutive-model parameters, gated by a
physics-informed validation protocol.
"""

__version__ = "0.1.0"
