from .dataset import ImageSet, load_imageset
from .manifest import POSES, DataError, Manifest, ManifestRow, check_pose_set, load_manifest, write_manifest
from .pnm import ImageDecodeError, decode_pnm, encode_pnm, read_image, write_image
from .preprocess import augment_train, eval_preprocess, hflip, resize_bilinear, resize_short_side, to_tensor
from .synth import SynthConfig, synthesize_dataset

__all__ = [
    "POSES", "DataError", "ImageDecodeError", "ImageSet", "Manifest", "ManifestRow", "SynthConfig",
    "augment_train", "check_pose_set", "decode_pnm", "encode_pnm", "eval_preprocess", "hflip",
    "load_imageset", "load_manifest", "read_image", "resize_bilinear", "resize_short_side",
    "synthesize_dataset", "to_tensor", "write_image", "write_manifest",
]
