"""Named experiments and the validated configs they run on.

Experiment modules register themselves with ``@experiment(name, summary, **defaults)``;
``HarnessConfig.ready`` imports them.
"""

import copy
from dataclasses import dataclass, field

from apps.core.exceptions import InvalidParameter, UnknownExperiment
from apps.dilation.geometry import DilationGroup
from apps.field.grid import GridSpec

from .api.serializers import ExperimentConfigSerializer

_REGISTRY = {}

COMMON_DEFAULTS = {"exponents": [1.0, 2.0], "seed": 0, "tolerances": {}}


@dataclass(frozen=True)
class Experiment:
    name: str
    run: object
    summary: str
    defaults: dict = field(default_factory=dict)

    def as_dict(self):
        return {"name": self.name, "summary": self.summary, "defaults": {**COMMON_DEFAULTS, **self.defaults}}


def experiment(name, summary, **defaults):
    def register(func):
        if name in _REGISTRY:
            raise InvalidParameter(f"experiment {name!r} registered twice")
        _REGISTRY[name] = Experiment(name, func, summary, defaults)
        return func
    return register


def get_experiment(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownExperiment(f"no experiment named {name!r}", available=sorted(_REGISTRY)) from None


def registered():
    return [_REGISTRY[name] for name in sorted(_REGISTRY)]


@dataclass(frozen=True)
class RunConfig:
    """An experiment name plus its config with the defaults filled in."""

    name: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def group(self):
        return DilationGroup.from_config(self.values)

    def grid(self, default=None):
        """The configured grid, else ``default`` (a GridSpec or a callable of the group)."""
        if self.values.get("grid"):
            return GridSpec.from_config(self.values["grid"])
        if callable(default):
            return default(self.group)
        if default is None:
            raise InvalidParameter(f"experiment {self.name} needs a grid")
        return default

    def tolerance(self, name, default):
        return float(self.values["tolerances"].get(name, default))

    def echo(self):
        """The config as recorded in reports (the output directory left out)."""
        echoed = copy.deepcopy(self.values)
        echoed.pop("output_dir", None)
        echoed["experiment"] = self.name
        return echoed


def build_config(name, data=None):
    """Validate ``data`` against the config schema and merge it over the defaults of ``name``."""
    entry = get_experiment(name)
    data = dict(data or {})
    if data.get("experiment", name) != name:
        raise InvalidParameter(f"config is for {data['experiment']!r}, not {name!r}")
    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        raise InvalidParameter("invalid experiment config", errors=serializer.errors)
    values = copy.deepcopy({**COMMON_DEFAULTS, **entry.defaults})
    values.update(serializer.validated_data)
    if values.get("grid") and len(values["grid"]["shape"]) != len(values["exponents"]):
        raise InvalidParameter("the grid dimension must match the number of exponents")
    return RunConfig(name, values)
