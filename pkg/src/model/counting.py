"""
Parameter counting.

Counts come from the same layout table that drives initialization, grouped
into an itemized breakdown whose entries always sum to the total.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List

import structlog
from jinja2 import Template

from config import ModelConfig
from model.decoder import decoder_param_count
from model.params import parameter_layout
from model.variants import EncoderVariant

logger = structlog.get_logger()

_BREAKDOWN_TEMPLATE = Template(
    """\
Parameter count: {{ variant }} (V={{ V }}, T={{ T }}, K={{ K }}, channels={{ channels }}, decoder stages={{ n_dec }})
{% for group, count in groups.items() %}
  {{ "%-28s"|format(group) }} {{ "%10d"|format(count) }}
{% endfor %}
  {{ "%-28s"|format("total") }} {{ "%10d"|format(total) }}
""",
    trim_blocks=True,
)

_COMPARISON_TEMPLATE = Template(
    """\
Variant comparison
{% for row in rows %}
  {{ "%-12s"|format(row.variant) }} {{ "%10d"|format(row.total) }}  x{{ "%.3f"|format(row.ratio) }} of separable
{% endfor %}
  full / separable ratio        {{ "%.3f"|format(full_ratio) }}
  shared saving vs separable    {{ "%.1f"|format(shared_saving * 100) }}%
""",
    trim_blocks=True,
)


@dataclass
class ParamBreakdown:
    variant: EncoderVariant
    groups: Dict[str, int] = field(default_factory=OrderedDict)

    @property
    def total(self) -> int:
        return sum(self.groups.values())

    def render(self, config: ModelConfig) -> str:
        return _BREAKDOWN_TEMPLATE.render(
            variant=self.variant.value,
            V=config.joints,
            T=config.input_frames,
            K=config.output_frames,
            channels="-".join(str(c) for c in config.channels),
            n_dec=config.decoder_layers,
            groups=self.groups,
            total=self.total,
        )


def param_breakdown(variant: EncoderVariant, config: ModelConfig) -> ParamBreakdown:
    variant = EncoderVariant(variant)
    breakdown = ParamBreakdown(variant)
    for slot in parameter_layout(config, variant):
        breakdown.groups[slot.group] = breakdown.groups.get(slot.group, 0) + slot.size
    decoder = sum(v for g, v in breakdown.groups.items() if g.startswith("decoder."))
    assert decoder == decoder_param_count(config), "decoder layout drifted from its closed form"
    return breakdown


def count_params(variant: EncoderVariant, config: ModelConfig) -> int:
    """Exact number of trainable scalars."""
    return param_breakdown(variant, config).total


def compare_variants(config: ModelConfig) -> List[Dict[str, object]]:
    base = count_params(EncoderVariant.SEPARABLE, config)
    return [
        {"variant": v.value, "total": count_params(v, config), "ratio": count_params(v, config) / base}
        for v in EncoderVariant
    ]


def render_comparison(config: ModelConfig) -> str:
    rows = compare_variants(config)
    by_name = {r["variant"]: r for r in rows}
    separable = by_name[EncoderVariant.SEPARABLE.value]["total"]
    shared = by_name[EncoderVariant.SEPARABLE_SHARED.value]["total"]
    return _COMPARISON_TEMPLATE.render(
        rows=rows,
        full_ratio=by_name[EncoderVariant.FULL.value]["ratio"],
        shared_saving=(separable - shared) / separable,
    )
