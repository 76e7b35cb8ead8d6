import math

from rest_framework import serializers

from nodalvar import kacrice, mesh
from nodalvar.config import (
    CHAOS2,
    COMMANDS,
    KACRICE_CURVE,
    KERNEL_CURVE,
    MC_NODAL,
    SELFCHECK,
    VARIANCE,
    GRule,
    PsiRange,
)
from nodalvar.errors import WindowError
from nodalvar.kernel import BandWindow, make_window


class IntegerListField(serializers.Field):
    """Comma separated integers, e.g. `200, 400, 800`."""

    def to_internal_value(self, data):
        try:
            values = tuple(int(item) for item in str(data).split(",") if item.strip())
        except ValueError:
            raise serializers.ValidationError("expected a comma separated list of integers")
        if not values:
            raise serializers.ValidationError("expected at least one value")
        return values

    def to_representation(self, value):
        return ", ".join(str(item) for item in value)


class GRuleField(serializers.Field):
    def to_internal_value(self, data):
        try:
            return GRule.parse(str(data))
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))

    def to_representation(self, value):
        return str(value)


class PsiRangeField(serializers.Field):
    """`min, max, count` with 0 < min <= max and count >= 1."""

    def to_internal_value(self, data):
        parts = [item.strip() for item in str(data).split(",")]
        if len(parts) != 3:
            raise serializers.ValidationError("expected 'min, max, count'")
        try:
            lower, upper, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise serializers.ValidationError("expected two numbers and an integer count")
        if not (0.0 < lower <= upper and math.isfinite(upper)) or count < 1:
            raise serializers.ValidationError("need 0 < min <= max and count >= 1")
        if count > 1 and lower == upper:
            raise serializers.ValidationError("min equals max with count > 1")
        return PsiRange(lower, upper, count)

    def to_representation(self, value):
        return f"{value.lower:g}, {value.upper:g}, {value.count}"


# keys each command cannot run without
REQUIRED = {
    KERNEL_CURVE: ("n_list", "g_rule", "psi_range"),
    KACRICE_CURVE: ("n_list", "g_rule", "psi_range"),
    VARIANCE: ("n_list", "g_rule"),
    MC_NODAL: ("n_list", "g_rule", "samples", "seed"),
    CHAOS2: ("n_list", "g_rule"),
    SELFCHECK: (),
}


class ExperimentConfigSerializer(serializers.Serializer):
    command = serializers.ChoiceField(choices=COMMANDS, required=False)
    n_list = IntegerListField(required=False)
    g_rule = GRuleField(required=False)
    psi_range = PsiRangeField(required=False)
    samples = serializers.IntegerField(min_value=0, required=False)
    mesh_level = serializers.IntegerField(min_value=0, max_value=mesh.MAX_LEVEL, required=False)
    seed = serializers.IntegerField(min_value=0, max_value=2**64 - 1, required=False)
    tol = serializers.FloatField(required=False)
    out_path = serializers.CharField(required=False)
    format = serializers.ChoiceField(choices=("csv", "json"), required=False)
    workers = serializers.IntegerField(min_value=1, required=False)
    split_c = serializers.FloatField(required=False)
    k_method = serializers.ChoiceField(choices=kacrice.K_METHODS, required=False)
    oracle = serializers.ChoiceField(choices=(kacrice.QUADRATURE, kacrice.MONTECARLO), required=False)
    oracle_samples = serializers.IntegerField(min_value=1000, required=False)
    points_per_wavelength = serializers.IntegerField(min_value=2, required=False)
    raw_dump = serializers.CharField(required=False)
    bootstrap = serializers.IntegerField(min_value=10, required=False)
    timing = serializers.BooleanField(required=False)

    def validate_tol(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("tol must lie in (0, 1)")
        return value

    def validate_split_c(self, value):
        if not value > 0.0:
            raise serializers.ValidationError("split_c must be positive")
        return value

    def _windows(self, attrs):
        rule = attrs["g_rule"]
        windows = []
        for n in attrs["n_list"]:
            if rule.kind == "single":
                windows.append(BandWindow.single(n))
            else:
                windows.append(make_window(n, rule.g_for(n)))
        return windows

    def validate(self, attrs):
        command = self.context["command"]
        errors = {}
        if attrs.get("command", command) != command:
            errors["command"] = [f"config is for {attrs['command']!r}, not {command!r}"]
        for key in REQUIRED[command]:
            if key not in attrs:
                errors.setdefault("non_field_errors", []).append(f"{command} needs '{key}'")
        randomized = (
            command == MC_NODAL
            or (command == CHAOS2 and attrs.get("samples", 0) > 0)
            or (command == KACRICE_CURVE and attrs.get("oracle") == kacrice.MONTECARLO)
        )
        if randomized and "seed" not in attrs:
            errors.setdefault("non_field_errors", []).append(f"{command} is randomized and needs 'seed'")
        samples = attrs.get("samples")
        if samples is not None and (command == MC_NODAL or samples > 0) and samples < 2:
            errors["samples"] = ["at least two samples are needed"]
        if "raw_dump" in attrs and len(attrs.get("n_list", ())) > 1 and "{n}" not in attrs["raw_dump"]:
            errors["raw_dump"] = ["with several n the path needs an '{n}' placeholder"]
        if "n_list" in attrs and "g_rule" in attrs and not errors:
            try:
                windows = self._windows(attrs)
            except WindowError as exc:
                errors["g_rule"] = [str(exc)]
            else:
                if attrs["g_rule"].kind == "single" and command == CHAOS2:
                    errors["g_rule"] = ["chaos2 needs a band window"]
                psi = attrs.get("psi_range")
                if psi is not None and command in (KERNEL_CURVE, KACRICE_CURVE):
                    limit = min(win.psi_max for win in windows)
                    if psi.upper > limit:
                        errors["psi_range"] = [f"max must not exceed {limit:.6g} for these windows"]
                if command == VARIANCE:
                    limit = min(win.psi_max for win in windows)
                    if attrs.get("split_c", 1.0) >= limit:
                        errors["split_c"] = [f"split_c must stay below {limit:.6g}"]
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class TimedRowSerializer(serializers.Serializer):
    """Drops `wall_time` unless the serializer context asks for timings."""

    def get_fields(self):
        fields = super().get_fields()
        if not self.context.get("timing", False):
            fields.pop("wall_time", None)
        return fields


class KernelCurveRowSerializer(serializers.Serializer):
    n = serializers.IntegerField()
    g = serializers.FloatField()
    psi = serializers.FloatField()
    theta = serializers.FloatField()
    gamma_exact = serializers.FloatField()
    gamma_cd = serializers.FloatField()
    gamma_asym = serializers.FloatField(allow_null=True)
    residual_cd = serializers.FloatField()
    residual_asym = serializers.FloatField(allow_null=True)


class KacRiceCurveRowSerializer(serializers.Serializer):
    n = serializers.IntegerField()
    g = serializers.FloatField()
    psi = serializers.FloatField()
    k_series = serializers.FloatField()
    k_oracle = serializers.FloatField()
    k_asym = serializers.FloatField(allow_null=True)
    residual_series = serializers.FloatField()
    residual_asym = serializers.FloatField(allow_null=True)
    oracle = serializers.CharField()
    oracle_stderr = serializers.FloatField()
    seed = serializers.IntegerField(allow_null=True)


class VarianceRowSerializer(TimedRowSerializer):
    n = serializers.IntegerField()
    g = serializers.FloatField()
    split_C = serializers.FloatField()
    tol = serializers.FloatField()
    method = serializers.CharField()
    I1 = serializers.FloatField()
    I2 = serializers.FloatField()
    total = serializers.FloatField()
    leading = serializers.FloatField()
    quad_error = serializers.FloatField()
    panels = serializers.IntegerField()
    hemisphere = serializers.BooleanField()
    series_from = serializers.FloatField(allow_null=True)
    spot_check = serializers.FloatField(allow_null=True)
    reliable = serializers.BooleanField()
    wall_time = serializers.FloatField()


class NodalStatsRowSerializer(TimedRowSerializer):
    n = serializers.IntegerField()
    g = serializers.FloatField()
    seed = serializers.IntegerField()
    n_samples = serializers.IntegerField()
    level = serializers.IntegerField()
    mesh_resolution = serializers.IntegerField()
    mean_length = serializers.FloatField()
    expected_mean = serializers.FloatField()
    stderr_mean = serializers.FloatField()
    var_length = serializers.FloatField()
    stderr_var = serializers.FloatField()
    leading = serializers.FloatField()
    discretization_note = serializers.CharField()
    wall_time = serializers.FloatField()


class ChaosRowSerializer(serializers.Serializer):
    n = serializers.IntegerField()
    g = serializers.FloatField()
    seed = serializers.IntegerField(allow_null=True)
    samples = serializers.IntegerField()
    var2_exact = serializers.FloatField()
    var2_asym = serializers.FloatField()
    ratio = serializers.FloatField(allow_null=True)
    var2_printed = serializers.FloatField()
    h2_exact = serializers.FloatField()
    h2_mc = serializers.FloatField(allow_null=True)
    h2_mc_stderr = serializers.FloatField(allow_null=True)
    h4_mc = serializers.FloatField(allow_null=True)
    h4_mc_stderr = serializers.FloatField(allow_null=True)


class SelfCheckRowSerializer(serializers.Serializer):
    name = serializers.CharField()
    passed = serializers.BooleanField()
    detail = serializers.CharField()
