from collections.abc import Mapping
from dataclasses import dataclass
from functools import reduce

import numpy as np

from gtalab.core.enums import FeatureKind, GuidanceMethod
from gtalab.core.errors import CheckpointIncompatibleError, ContractError
from gtalab.core.types import GuidanceSpec
from gtalab.model.trace import AttentionTrace
from gtalab.model.vit import HEAD_PREFIX, cls_attention_row
from gtalab.ndtensor import Tensor
from gtalab.ndtensor import ops


@dataclass
class LossBreakdown:
    """Objective pieces of one step: total = ce + lam * reg."""

    ce: Tensor
    reg: Tensor
    total: Tensor
    lam: float

    def as_floats(self) -> dict[str, float]:
        return {"ce": self.ce.item(), "reg": self.reg.item(), "total": self.total.item()}


def _sum_terms(terms: list[Tensor]) -> Tensor:
    return reduce(ops.add, terms) if terms else Tensor(0.0)


def gta_loss(src_trace: AttentionTrace, tgt_trace: AttentionTrace) -> Tensor:
    """
    Sum over blocks and heads of the squared L2 distance between the [cls]
    logit rows (self-logit excluded) of source and target, averaged over
    the batch. The source trace is detached, so only the target receives
    gradient.
    """
    tgt_trace.check_compatible(src_trace)
    src = src_trace.detach()
    terms = [
        ops.sum(ops.square(ops.sub(cls_attention_row(tgt), cls_attention_row(ref))))
        for ref, tgt in zip(src.all_logits(), tgt_trace.all_logits(), strict=True)
    ]
    return ops.scale(_sum_terms(terms), 1.0 / tgt_trace.batch_size)


def feature_guide_loss(kind: FeatureKind, src_trace: AttentionTrace, tgt_trace: AttentionTrace) -> Tensor:
    """Squared L2 distance of whole per-block MSA or block outputs, summed over blocks."""
    tgt_trace.check_compatible(src_trace)
    kind = FeatureKind(kind)
    src = src_trace.detach()
    if kind == FeatureKind.MSA_OUTPUT:
        pairs = zip(src.msa_outputs, tgt_trace.msa_outputs, strict=True)
    else:
        pairs = zip(src.block_outputs, tgt_trace.block_outputs, strict=True)
    terms = [ops.sum(ops.square(ops.sub(tgt, ref))) for ref, tgt in pairs]
    return ops.scale(_sum_terms(terms), 1.0 / tgt_trace.batch_size)


def l2sp_penalty(
    params: Mapping[str, Tensor | np.ndarray], init_params: Mapping[str, np.ndarray]
) -> Tensor:
    """Sum of ||w - w0||^2 over every non-head parameter."""
    names = sorted(name for name in params if not name.startswith(HEAD_PREFIX))
    init_names = sorted(name for name in init_params if not name.startswith(HEAD_PREFIX))
    if names != init_names:
        missing = sorted(set(init_names) - set(names))
        unexpected = sorted(set(names) - set(init_names))
        msg = f"L2-SP parameter maps differ: missing={missing}, unexpected={unexpected}"
        raise CheckpointIncompatibleError(msg)
    terms = []
    for name in names:
        value = params[name] if isinstance(params[name], Tensor) else Tensor(params[name])
        anchor = np.asarray(init_params[name])
        if value.shape != anchor.shape:
            msg = f"L2-SP shape mismatch for {name}: {value.shape} vs {anchor.shape}"
            raise CheckpointIncompatibleError(msg)
        terms.append(ops.sum(ops.square(ops.sub(value, Tensor(anchor)))))
    return _sum_terms(terms)


def regularizer(
    spec: GuidanceSpec,
    src_trace: AttentionTrace | None,
    tgt_trace: AttentionTrace | None,
    params: Mapping[str, Tensor] | None,
    init_params: Mapping[str, np.ndarray] | None,
) -> Tensor:
    method = spec.method
    if method == GuidanceMethod.NONE:
        return Tensor(0.0)
    if method == GuidanceMethod.L2SP:
        if params is None or init_params is None:
            msg = "l2sp needs both the current and the initial parameter maps"
            raise ContractError(msg)
        return l2sp_penalty(params, init_params)
    if src_trace is None or tgt_trace is None:
        msg = f"Guidance method {method.value} needs source and target traces"
        raise ContractError(msg)
    if method == GuidanceMethod.GTA:
        return gta_loss(src_trace, tgt_trace)
    kind = FeatureKind.MSA_OUTPUT if method == GuidanceMethod.MSA_GUIDE else FeatureKind.BLOCK_OUTPUT
    return feature_guide_loss(kind, src_trace, tgt_trace)


def total_loss(  # noqa: PLR0913
    ce: Tensor,
    spec: GuidanceSpec,
    src_trace: AttentionTrace | None = None,
    tgt_trace: AttentionTrace | None = None,
    params: Mapping[str, Tensor] | None = None,
    init_params: Mapping[str, np.ndarray] | None = None,
) -> LossBreakdown:
    """
    L = CE + lambda * regularizer.

    With lambda == 0 or method none the regularizer is not evaluated and
    total is the CE tensor itself.
    """
    if not spec.active:
        return LossBreakdown(ce=ce, reg=Tensor(0.0), total=ce, lam=spec.lam)
    reg = regularizer(spec, src_trace, tgt_trace, params, init_params)
    return LossBreakdown(ce=ce, reg=reg, total=ops.add(ce, ops.scale(reg, spec.lam)), lam=spec.lam)
