from gtalab.data.image_dir import export_dataset, load_image_dir, quantize
from gtalab.data.sampling import subset_per_class
from gtalab.data.synthetic import class_glyph, generate_synthetic_dataset

__all__ = [
    "class_glyph",
    "export_dataset",
    "generate_synthetic_dataset",
    "load_image_dir",
    "quantize",
    "subset_per_class",
]
