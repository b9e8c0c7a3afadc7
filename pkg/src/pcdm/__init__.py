"""Joint color and polarization demosaicing with learned sparse dictionaries."""

__version__ = "0.1.0"

from .admm import AdmmConfig, DemosaicResult, DictionarySet, demosaic, demosaic_variant
from .baselines import bicubic_demosaic, bilinear_demosaic
from .dictionary import Dictionary, ksvd_train, load_dictionary, save_dictionary
from .metrics import evaluate
from .mosaic import SceneSpec, mosaic, synthesize_scene
from .pattern import ChannelId, ImageStack, MosaicImage, default_pattern

__all__ = [
    "AdmmConfig", "ChannelId", "DemosaicResult", "Dictionary", "DictionarySet", "ImageStack",
    "MosaicImage", "SceneSpec", "bicubic_demosaic", "bilinear_demosaic", "default_pattern",
    "demosaic", "demosaic_variant", "evaluate", "ksvd_train", "load_dictionary", "mosaic",
    "save_dictionary", "synthesize_scene",
]
