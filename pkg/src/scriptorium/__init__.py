"""Document-image-to-text toolkit.

Pipeline stages: binarization (raster), blob and line extraction
(segmentation), oriented outline extraction and matching (outlines,
matching), thinning (skeleton), sliding-window framing plus a log-space
CTC engine with a small trainable recurrent model (sequence), and
corpus synthesis / edit-distance scoring (corpus, evaluate).
"""

__version__ = "0.1.0"
