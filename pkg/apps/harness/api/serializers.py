import math
from collections.abc import Mapping

from rest_framework import serializers

from apps.core.exceptions import AnalysisError
from apps.kernels.synthesis import KernelKind

MAX_GRID_POINTS = 1 << 24


def _require_positive(values, name):
    bad = [v for v in values if not v > 0 or not math.isfinite(v)]
    if bad:
        raise serializers.ValidationError(f"{name} must be positive and finite, got {bad}")
    return values


def _require_unit_interval(value):
    if not 0 < value < 1:
        raise serializers.ValidationError(f"must lie in (0, 1), got {value}")
    return value


class RejectUnknownKeysMixin:
    """Fail validation on keys the serializer does not declare (nested ones included)."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["unknown key"] for key in unknown})
        return super().to_internal_value(data)


class GridConfigSerializer(RejectUnknownKeysMixin, serializers.Serializer):
    """
    Sample counts and box side lengths of a periodic grid.
    Sample counts must be powers of two.
    """
    shape = serializers.ListField(child=serializers.IntegerField(min_value=2, max_value=1 << 14),
                                  min_length=1, max_length=4)
    extent = serializers.ListField(child=serializers.FloatField(), min_length=1, max_length=4)

    def validate_shape(self, value):
        odd = [n for n in value if n & (n - 1)]
        if odd:
            raise serializers.ValidationError(f"sample counts must be powers of two, got {odd}")
        if math.prod(value) > MAX_GRID_POINTS:
            raise serializers.ValidationError(f"grid has more than {MAX_GRID_POINTS} points")
        return value

    def validate_extent(self, value):
        return _require_positive(value, "extents")

    def validate(self, attrs):
        attrs = super().validate(attrs)
        if len(attrs["shape"]) != len(attrs["extent"]):
            raise serializers.ValidationError("shape and extent need the same length")
        return attrs


class IndexRangeField(serializers.ListField):
    """A closed integer range ``[lo, hi]``."""

    def __init__(self, **kwargs):
        kwargs.setdefault("child", serializers.IntegerField(min_value=-30, max_value=30))
        super().__init__(min_length=2, max_length=2, **kwargs)

    def to_internal_value(self, data):
        value = super().to_internal_value(data)
        if value[0] > value[1]:
            raise serializers.ValidationError(f"empty range {value}")
        return value


class ExperimentConfigSerializer(RejectUnknownKeysMixin, serializers.Serializer):
    """
    Serializer for experiment configs.
    One JSON document per run; every key is optional and falls back to the
    experiment's defaults. Unknown keys are rejected.
    """
    experiment = serializers.CharField(required=False)
    exponents = serializers.ListField(child=serializers.FloatField(min_value=1.0),
                                      min_length=1, max_length=4, required=False)
    root_tolerance = serializers.FloatField(min_value=1e-15, max_value=1e-4, required=False)
    grid = GridConfigSerializer(required=False)
    alpha = serializers.FloatField(required=False)
    alpha_values = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)
    p = serializers.FloatField(min_value=1.0, required=False)
    p_values = serializers.ListField(child=serializers.FloatField(min_value=1.0), min_length=1, required=False)
    betas = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)
    beta_factors = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)
    t_values = serializers.ListField(child=serializers.FloatField(), min_length=1, required=False)
    j_range = IndexRangeField(required=False)
    shell_range = IndexRangeField(required=False)
    m_range = IndexRangeField(required=False, allow_null=True)
    seed = serializers.IntegerField(min_value=0, required=False)
    samples = serializers.IntegerField(min_value=1, max_value=1_000_000, required=False)
    dilate = serializers.FloatField(min_value=1.0, required=False)
    kernels = serializers.ListField(child=serializers.CharField(), min_length=1, required=False)
    tolerances = serializers.DictField(child=serializers.FloatField(min_value=0.0), required=False)
    output_dir = serializers.CharField(required=False)

    def validate_alpha(self, value):
        return _require_unit_interval(value)

    def validate_alpha_values(self, value):
        return [_require_unit_interval(v) for v in value]

    def validate_betas(self, value):
        return _require_positive(value, "betas")

    def validate_beta_factors(self, value):
        return _require_positive(value, "beta_factors")

    def validate_t_values(self, value):
        return _require_positive(value, "t_values")

    def validate_kernels(self, value):
        for text in value:
            try:
                KernelKind.parse(text, alpha=0.5)
            except AnalysisError as exc:
                raise serializers.ValidationError(str(exc)) from None
        return value

    def validate(self, attrs):
        attrs = super().validate(attrs)
        if "grid" in attrs and "exponents" in attrs and len(attrs["grid"]["shape"]) != len(attrs["exponents"]):
            raise serializers.ValidationError("the grid dimension must match the number of exponents")
        return attrs


class ExperimentSummarySerializer(serializers.Serializer):
    """
    Name, one-line summary and default config of a registered experiment.
    """
    name = serializers.CharField()
    summary = serializers.CharField()
    defaults = serializers.JSONField()


class ReportSerializer(serializers.Serializer):
    """
    Serializer for experiment reports: metrics, series, verdicts and provenance.
    """
    experiment = serializers.CharField()
    config = serializers.JSONField()
    metrics = serializers.JSONField()
    series = serializers.JSONField()
    verdicts = serializers.JSONField()
    provenance = serializers.JSONField()
    passed = serializers.BooleanField()


class RhoRequestSerializer(RejectUnknownKeysMixin, serializers.Serializer):
    """
    Exponents of the dilation group and the points at which rho is evaluated.
    """
    exponents = serializers.ListField(child=serializers.FloatField(min_value=1.0), min_length=1, max_length=4)
    root_tolerance = serializers.FloatField(min_value=1e-15, max_value=1e-4, required=False)
    points = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), min_length=1, max_length=100_000,
    )

    def validate(self, attrs):
        attrs = super().validate(attrs)
        n = len(attrs["exponents"])
        if any(len(point) != n for point in attrs["points"]):
            raise serializers.ValidationError(f"every point needs {n} coordinates")
        return attrs


class RhoResultSerializer(serializers.Serializer):
    exponents = serializers.ListField(child=serializers.FloatField())
    gamma = serializers.FloatField()
    rho = serializers.ListField(child=serializers.FloatField())
