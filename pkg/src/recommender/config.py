"""Model hyper-parameters and ablation variants."""
from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import ConfigError


class Variant(str, Enum):
    """Architecture switches for the ablation study."""
    FULL = 'full'
    NO_SHORT_ATTENTION = 'no_short_attention'
    NO_LONG_ATTENTION = 'no_long_attention'
    SINGLE_HEAD = 'single_head'
    GATE_AVERAGE = 'gate_average'
    GATE_SELF_ATTENTION = 'gate_self_attention'
    GATE_MULTIHEAD = 'gate_multihead'

    @property
    def short_label(self) -> str:
        """Table label such as ``-S`` or ``G+A``."""
        return VARIANT_LABELS[self]

    @property
    def uses_gate(self) -> bool:
        return self in GATED_VARIANTS

    @property
    def uses_blocks(self) -> bool:
        return self is not Variant.NO_LONG_ATTENTION

    @property
    def uses_short_attention(self) -> bool:
        return self is not Variant.NO_SHORT_ATTENTION


VARIANT_LABELS = {
    Variant.FULL: 'full',
    Variant.NO_SHORT_ATTENTION: '-S',
    Variant.NO_LONG_ATTENTION: '-L',
    Variant.SINGLE_HEAD: '-M',
    Variant.GATE_AVERAGE: 'G+A',
    Variant.GATE_SELF_ATTENTION: 'G+S',
    Variant.GATE_MULTIHEAD: 'G+M',
}

GATED_VARIANTS = frozenset({
    Variant.FULL, Variant.NO_SHORT_ATTENTION, Variant.NO_LONG_ATTENTION, Variant.SINGLE_HEAD
})

DROPOUT_SITES = ('items', 'ffn', 'gate')


def _normalize_label(label: str) -> str:
    label = label.strip().replace('−', '-')
    for prefix in ('TLSRec', 'tlsrec'):
        if label.startswith(prefix):
            label = label[len(prefix):]
            break
    if label.upper().startswith('-G+'):
        label = label[1:]
    return label.upper() if label.lower().startswith(('g+', '-')) else label.lower()


_ALIASES = {
    **{variant.value: variant for variant in Variant},
    **{label.upper() if label != 'full' else label: variant for variant, label in VARIANT_LABELS.items()},
    '': Variant.FULL,
}


def parse_variant(value) -> Variant:
    """
    Resolve a variant name or table label.

    Accepts the enum values (``gate_average``), the short labels (``G+A``,
    ``-S``, also with a Unicode minus) and the ``TLSRec-S`` spelling.

    Raises:
        ConfigError: For an unknown name, listing the valid ones
    """
    if isinstance(value, Variant):
        return value
    key = _normalize_label(str(value))
    if key not in _ALIASES:
        valid = ', '.join(f"{v.value} ({v.short_label})" for v in Variant)
        raise ConfigError(f"unknown variant {value!r}; valid variants: {valid}")
    return _ALIASES[key]


class ModelConfig(BaseModel):
    """
    Shape and regularization settings of one model.

    ``T`` and ``m`` come from the instance file; ``C`` is the number of time
    lag embeddings. ``effective_heads`` is 1 for the single-head variant.
    """
    model_config = ConfigDict(frozen=True, extra='forbid', use_enum_values=False)

    d: int = Field(64, ge=1)
    h: int = Field(8, ge=1)
    T: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    C: int = Field(128, ge=1)
    block_count: int = Field(1, ge=1)
    dropout_rate: float = Field(0.5, ge=0.0, lt=1.0)
    variant: Variant = Variant.FULL
    layer_norm_eps: float = Field(1e-5, gt=0.0)
    dropout_sites: Tuple[str, ...] = DROPOUT_SITES

    @field_validator('variant', mode='before')
    @classmethod
    def _resolve_variant(cls, value):
        return parse_variant(value)

    @field_validator('dropout_sites', mode='before')
    @classmethod
    def _check_sites(cls, value):
        if isinstance(value, str):
            value = [site.strip() for site in value.split(',') if site.strip()]
        value = tuple(value)
        unknown = set(value) - set(DROPOUT_SITES)
        if unknown:
            raise ValueError(f"unknown dropout sites {sorted(unknown)}; valid: {', '.join(DROPOUT_SITES)}")
        return value

    @model_validator(mode='after')
    def _check_heads(self):
        if self.d % self.h != 0:
            raise ValueError(f"d={self.d} must be divisible by h={self.h}")
        return self

    @property
    def effective_heads(self) -> int:
        return 1 if self.variant is Variant.SINGLE_HEAD else self.h

    @property
    def head_dim(self) -> int:
        return self.d // self.effective_heads

    def dropout_at(self, site: str) -> float:
        """Dropout rate applied at ``site`` (0 when the site is switched off)."""
        return self.dropout_rate if site in self.dropout_sites else 0.0

    def header_dict(self) -> dict:
        """JSON-ready form used by checkpoint headers."""
        data = self.model_dump()
        data['variant'] = self.variant.value
        data['dropout_sites'] = list(self.dropout_sites)
        return data
