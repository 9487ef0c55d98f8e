"""Typed configuration: model parameters and the run configuration.

A run configuration is read from a flat ``key = value`` file; command-line
overrides win over the file, and the file wins over the defaults declared
below.
"""
import logging
import os

from copolymer.base.config import BaseConfig
from copolymer.errors import ValidationError
from copolymer.fields import (
    BooleanField,
    ChoiceField,
    FloatField,
    FloatListField,
    IntegerField,
    IntListField,
    SeedField,
    StringField,
)

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "COPOLYMER_THREADS"


class ModelParams(BaseConfig):
    """Interaction pair (alpha, beta), block density p, vertical cap M and
    per-column step cap m."""

    alpha = FloatField(default=0.0, min_value=0.0)
    beta = FloatField(default=0.0)
    p = FloatField(default=0.5, min_value=0.0, max_value=1.0)
    M = IntegerField(default=1, min_value=1)
    m = IntegerField(default=3, min_value=3)

    def clean(self):
        if self.alpha < abs(self.beta):
            raise ValidationError("(alpha, beta) must satisfy alpha >= |beta|")
        if self.m < self.M + 2:
            raise ValidationError("(M, m) must satisfy m >= M + 2")

    @property
    def half_gap(self):
        """(beta - alpha) / 2, the per-step B-solvent penalty."""
        return (self.beta - self.alpha) / 2.0


def model_params(alpha=0.0, beta=0.0, p=0.5, M=1, m=None):
    return ModelParams(alpha=alpha, beta=beta, p=p, M=M, m=M + 2 if m is None else m).validate()


def _default_threads():
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", THREADS_ENV_VAR, raw)
        return 1


class RunConfig(ModelParams):
    seed = SeedField(default=20240601)
    out = StringField(default="out", min_length=1)
    threads = IntegerField(default=_default_threads, min_value=1)

    # enumeration budgets
    budget = IntegerField(default=24, min_value=1, help_text="max u*L for exact path counts")
    path_budget = IntegerField(default=14, min_value=1, help_text="max n for W_{n,M} enumeration")
    oracle_max_L = IntegerField(default=4, min_value=1)

    # entropy tables
    entropy_ladder = IntListField(default=lambda: [8, 16, 32, 64], min_value=1, min_length=1)
    entropy_u = FloatListField(default=lambda: [1.5, 2.0, 3.0, 4.0, 6.0], min_value=1.0)
    entropy_l = FloatListField(default=lambda: [0.0, 0.5, 1.0, 2.0], min_value=0.0)

    # interface table
    interface_ladder = IntListField(default=lambda: [8, 16, 32], min_value=1, min_length=1)
    interface_samples = IntegerField(default=200, min_value=2)
    mu_max = FloatField(default=8.0, min_value=1.0)
    mu_step = FloatField(default=0.1, min_value=1e-6)
    exact_below_zero = BooleanField(
        default=True, help_text="use phi_I = kappa(mu, 0) exactly when beta <= 0"
    )

    # column solver
    u_cap = FloatField(default=64.0, min_value=1.0)

    # strategy family
    strategies = IntegerField(default=12, min_value=4)
    columns = IntegerField(default=10000, min_value=1)
    interface_floor = FloatField(default=0.1, min_value=0.0, max_value=1.0)
    family = ChoiceField(("default", "hor"), default="default")

    # phase scan
    scan_alpha_min = FloatField(default=0.0, min_value=0.0)
    scan_alpha_max = FloatField(default=6.0, min_value=0.0)
    scan_alpha_steps = IntegerField(default=21, min_value=1)
    scan_beta_min = FloatField(default=-6.0)
    scan_beta_max = FloatField(default=6.0)
    scan_beta_steps = IntegerField(default=21, min_value=1)
    margin = FloatField(default=1e-3, min_value=0.0)
    p_c = FloatField(default=0.6447, min_value=0.0, max_value=1.0)
    alpha_star_max = FloatField(default=20.0, min_value=0.0)
    betac_alphas = FloatListField(default=list)
    betac_samples = IntegerField(default=64, min_value=2)
    betac_ladder = IntListField(default=lambda: [8, 16], min_value=1, min_length=1)

    # tolerances
    dinkelbach_tol = FloatField(default=1e-9, min_value=0.0)
    dinkelbach_max_iter = IntegerField(default=200, min_value=1)
    psi_tol = FloatField(default=1e-8, min_value=0.0)

    @property
    def params(self):
        return ModelParams(alpha=self.alpha, beta=self.beta, p=self.p, M=self.M, m=self.m)

    def clean(self):
        super().clean()
        if self.scan_alpha_max < self.scan_alpha_min:
            raise ValidationError("scan_alpha_max must not be below scan_alpha_min")
        if self.scan_beta_max < self.scan_beta_min:
            raise ValidationError("scan_beta_max must not be below scan_beta_min")


def parse_config_text(text):
    """Parse flat ``key = value`` lines into a dict of raw strings.

    Blank lines and ``#`` comments are skipped; a repeated key is an error.
    """
    values = {}
    errors = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors[f"line {lineno}"] = ValidationError("expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            errors[f"line {lineno}"] = ValidationError(f"duplicate key {key!r}")
            continue
        values[key] = value
    if errors:
        raise ValidationError("Malformed configuration file ", errors=errors)
    return values


def load_config(path=None, overrides=None):
    """Resolve a :class:`RunConfig` with precedence overrides > file > defaults."""
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as handle:
            values.update(parse_config_text(handle.read()))
        logger.debug("read %d keys from %s", len(values), path)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig(**values).validate()


def dump_config(config):
    """Render every key, defaults included, in the file format."""
    lines = [f"{key} = {value}" for key, value in config.to_text_dict().items()]
    return "\n".join(lines) + "\n"
