import logging

import numpy as np

from gtalab.core.constants import DEFAULT_MASS_FRACTION
from gtalab.core.enums import MapMode
from gtalab.core.errors import ContractError
from gtalab.core.types import Dataset, EvalRecord
from gtalab.evaluation.maps import attention_grids
from gtalab.evaluation.metrics import (
    accuracy_from_logits,
    foreground_mass,
    jaccard,
    logit_distance_stats,
    mask_to_grid,
    threshold_grid,
)
from gtalab.model.vit import ViTModel, forward
from gtalab.ndtensor import no_grad

logger = logging.getLogger(__name__)


def accuracy(model: ViTModel, dataset: Dataset, batch_size: int = 64) -> float:
    if len(dataset) == 0:
        msg = "accuracy needs a nonempty dataset"
        raise ContractError(msg)
    return accuracy_from_logits(model.predict_logits(dataset.images(), batch_size=batch_size), dataset.labels)


def evaluate_model(  # noqa: PLR0913
    model: ViTModel,
    dataset: Dataset,
    source: ViTModel | None = None,
    mass_fraction: float = DEFAULT_MASS_FRACTION,
    map_mode: MapMode = MapMode.FINAL_BLOCK,
    batch_size: int = 64,
) -> EvalRecord:
    """
    Accuracy plus attention quality: Jaccard of the thresholded map against
    ground-truth masks on the patch grid, foreground attention mass, and the
    [cls]-logit drift to `source` when given. Samples without a mask are
    left out of the mask metrics.
    """
    if len(dataset) == 0:
        msg = "evaluation needs a nonempty dataset"
        raise ContractError(msg)
    map_mode = MapMode(map_mode)
    config = model.config
    logits_chunks = []
    jaccards: list[float] = []
    masses: list[float] = []
    drift_mean: list[tuple[float, int]] = []
    drift_max = 0.0
    with no_grad():
        params = model.bind()
        source_params = source.bind() if source is not None else None
        for start in range(0, len(dataset), batch_size):
            indices = list(range(start, min(start + batch_size, len(dataset))))
            images = dataset.images(indices)
            logits, trace = forward(images, params, config, capture=True)
            logits_chunks.append(logits.numpy())
            grids = attention_grids(trace, map_mode)
            for row, index in enumerate(indices):
                mask = dataset[index].mask
                if mask is None:
                    continue
                truth = mask_to_grid(mask, config.patch_size)
                if not truth.any():
                    continue
                jaccards.append(jaccard(threshold_grid(grids[row], mass_fraction), truth))
                masses.append(foreground_mass(grids[row], truth))
            if source_params is not None:
                _, src_trace = forward(images, source_params, source.config, capture=True)
                stats = logit_distance_stats(src_trace, trace)
                drift_mean.append((stats.mean, len(indices)))
                drift_max = max(drift_max, stats.max)

    record = EvalRecord(
        accuracy=accuracy_from_logits(np.concatenate(logits_chunks), dataset.labels),
        jaccard=float(np.mean(jaccards)) if jaccards else None,
        foreground_mass=float(np.mean(masses)) if masses else None,
        mass_fraction=mass_fraction,
        map_mode=map_mode,
    )
    if drift_mean:
        total = sum(n for _, n in drift_mean)
        record.logit_distance = sum(value * n for value, n in drift_mean) / total
        record.extra["logit_distance_max"] = drift_max
    msg = (
        f"Evaluated {len(dataset)} samples: accuracy={record.accuracy:.4f}"
        + (f", jaccard={record.jaccard:.4f}" if record.jaccard is not None else "")
    )
    logger.info(msg)
    return record
