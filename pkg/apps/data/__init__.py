from apps.data.dataset import (
    DatasetManifest,
    ManifestEntry,
    SRDataset,
    manifest_checksum,
    read_manifest,
    write_dataset,
)
from apps.data.imageio import quantize, read_image, write_image
from apps.data.resample import bicubic_resample, cubic_kernel, degrade, downsample
from apps.data.synthetic import SyntheticSpec, generate_synthetic, render

__all__ = [
    "DatasetManifest",
    "ManifestEntry",
    "SRDataset",
    "SyntheticSpec",
    "bicubic_resample",
    "cubic_kernel",
    "degrade",
    "downsample",
    "generate_synthetic",
    "manifest_checksum",
    "quantize",
    "read_image",
    "read_manifest",
    "render",
    "write_dataset",
    "write_image",
]
