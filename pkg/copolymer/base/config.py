from copolymer.base.metaclasses import ConfigMetaclass
from copolymer.errors import ValidationError

NON_FIELD_ERRORS = "__all__"


class BaseConfig(metaclass=ConfigMetaclass):
    """A flat, typed, validated set of named values.

    Instances are built from keyword arguments (or a mapping via
    :meth:`from_mapping`); every declared field not given falls back to its
    default, and unknown keys are rejected.
    """

    def __init__(self, **values):
        self._data = {}
        unknown = set(values) - set(self._fields)
        if unknown:
            raise ValidationError(
                f"Unknown configuration keys for {type(self).__name__}: "
                f"{', '.join(sorted(unknown))}"
            )
        for name in self._fields_ordered:
            setattr(self, name, values.get(name))

    @classmethod
    def from_mapping(cls, mapping, prefix=""):
        """Build from a flat mapping, keeping the keys that start with
        ``prefix`` (with the prefix stripped)."""
        values = {}
        for key, value in mapping.items():
            if prefix:
                if not key.startswith(prefix):
                    continue
                key = key[len(prefix):]
            values[key] = value
        return cls(**values)

    def clean(self):
        """Hook for cross-field validation; raise ValidationError."""
        pass

    def validate(self, clean=True):
        """Check every key, then ``clean()`` for cross-key rules.

        All failures are collected into one :class:`ValidationError` keyed by
        field name (``__all__`` for ``clean``). Returns ``self``.
        """
        errors = {}
        for name in self._fields_ordered:
            field = self._fields[name]
            value = self._data.get(name)
            if value is not None:
                try:
                    field.check(value)
                except ValidationError as error:
                    errors[name] = error.errors or error
                except (ValueError, AttributeError, AssertionError) as error:
                    errors[name] = error
            elif field.required:
                errors[name] = ValidationError("Field is required", field_name=name)

        if clean and not errors:
            try:
                self.clean()
            except ValidationError as error:
                errors[NON_FIELD_ERRORS] = error

        if errors:
            raise ValidationError(f"ValidationError ({type(self).__name__}) ", errors=errors)
        return self

    def to_dict(self):
        return {name: self._data.get(name) for name in self._fields_ordered}

    def to_text_dict(self):
        return {
            name: self._fields[name].to_text(self._data.get(name))
            for name in self._fields_ordered
        }

    def replace(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return type(self)(**values)

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((type(self).__name__, tuple(_freeze(v) for v in self.to_dict().values())))

    def __repr__(self):
        body = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items())
        return f"{type(self).__name__}({body})"


def _freeze(value):
    return tuple(value) if isinstance(value, list) else value
