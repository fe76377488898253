"""
On-disk dataset layout:

    labels.csv        header `filename,label`, one row per sample
    <filename>        binary PPM (P6, maxval 255)
    masks/<stem>.pgm  optional binary PGM (P5), > 127 marks foreground
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from gtalab.core.enums import Split
from gtalab.core.errors import DataIngestionError
from gtalab.core.types import Dataset, Sample

logger = logging.getLogger(__name__)

LABELS_FILE = "labels.csv"
MASK_DIR = "masks"
MASK_THRESHOLD = 127


def quantize(values: np.ndarray) -> np.ndarray:
    """[0, 1] floats to 8-bit, rounding half to even."""
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def export_dataset(dataset: Dataset, path: str | Path) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if any(s.mask is not None for s in dataset.samples):
        (root / MASK_DIR).mkdir(exist_ok=True)
    rows = []
    for index, sample in enumerate(dataset.samples):
        filename = f"{sample.name or f'{index:05d}'}.ppm"
        pixels = np.ascontiguousarray(quantize(sample.image.transpose(1, 2, 0)))
        Image.fromarray(pixels).save(root / filename, format="PPM")
        if sample.mask is not None:
            mask = np.where(sample.mask, 255, 0).astype(np.uint8)
            Image.fromarray(mask).save(root / MASK_DIR / f"{Path(filename).stem}.pgm", format="PPM")
        rows.append({"filename": filename, "label": sample.label})
    frame = pd.DataFrame(rows, columns=["filename", "label"])
    frame.to_csv(root / LABELS_FILE, index=False, encoding="utf-8")
    msg = f"Exported {len(rows)} samples to {root}"
    logger.info(msg)
    return root


def _read_labels(root: Path) -> pd.DataFrame:
    labels_path = root / LABELS_FILE
    if not labels_path.is_file():
        msg = f"{labels_path}: labels file not found"
        raise DataIngestionError(msg)
    try:
        frame = pd.read_csv(labels_path, dtype={"filename": str}, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        msg = f"{labels_path}: empty dataset"
        raise DataIngestionError(msg) from e
    if list(frame.columns) != ["filename", "label"]:
        msg = f"{labels_path}: expected header 'filename,label', got {','.join(map(str, frame.columns))}"
        raise DataIngestionError(msg)
    if frame.empty:
        msg = f"{labels_path}: empty dataset"
        raise DataIngestionError(msg)
    duplicated = frame["filename"][frame["filename"].duplicated()]
    if not duplicated.empty:
        msg = f"{labels_path}: duplicate filename {duplicated.iloc[0]}"
        raise DataIngestionError(msg)
    return frame


def _parse_label(value, filename: str, num_classes: int | None) -> int:
    try:
        label = int(value)
    except (TypeError, ValueError) as e:
        msg = f"{filename}: label {value!r} is not an integer"
        raise DataIngestionError(msg) from e
    if label != value or label < 0 or (num_classes is not None and label >= num_classes):
        bound = num_classes if num_classes is not None else "C"
        msg = f"{filename}: label {value} outside [0, {bound})"
        raise DataIngestionError(msg)
    return label


def _read_image(path: Path, mode: str) -> np.ndarray:
    if not path.is_file():
        msg = f"{path}: file not found"
        raise DataIngestionError(msg)
    try:
        with Image.open(path) as image:
            image.load()
            if image.format != "PPM" or image.mode != mode:
                kind = "PPM P6" if mode == "RGB" else "PGM P5"
                msg = f"{path}: expected binary {kind}, got {image.format} {image.mode}"
                raise DataIngestionError(msg)
            return np.asarray(image)
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        msg = f"{path}: malformed image header ({e})"
        raise DataIngestionError(msg) from e


def load_image_dir(path: str | Path, num_classes: int | None = None, split: Split = Split.TRAIN) -> Dataset:
    """Read a directory written by export_dataset (or by hand in the same layout)."""
    root = Path(path)
    frame = _read_labels(root)
    samples = []
    shape = None
    for filename, raw_label in zip(frame["filename"], frame["label"], strict=True):
        label = _parse_label(raw_label, filename, num_classes)
        pixels = _read_image(root / filename, "RGB")
        if shape is not None and pixels.shape != shape:
            msg = f"{root / filename}: image size {pixels.shape[:2]} differs from {shape[:2]}"
            raise DataIngestionError(msg)
        shape = pixels.shape
        mask_path = root / MASK_DIR / f"{Path(filename).stem}.pgm"
        mask = None
        if mask_path.exists():
            mask = _read_image(mask_path, "L") > MASK_THRESHOLD
            if mask.shape != pixels.shape[:2]:
                msg = f"{mask_path}: mask size {mask.shape} does not match its image"
                raise DataIngestionError(msg)
        image = pixels.astype(np.float64).transpose(2, 0, 1) / 255.0
        samples.append(Sample(image=image, label=label, mask=mask, name=Path(filename).stem))
    msg = f"Loaded {len(samples)} samples from {root} ({sum(s.mask is not None for s in samples)} with masks)"
    logger.info(msg)
    return Dataset(samples=samples, split=split, num_classes=num_classes)
