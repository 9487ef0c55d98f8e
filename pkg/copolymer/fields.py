import contextlib
import math

from copolymer.base.fields import BaseField

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class _Bounded(BaseField):
    """Numeric key with optional inclusive bounds."""

    def __init__(self, min_value=None, max_value=None, **kwargs):
        self.min_value = min_value
        self.max_value = max_value
        super().__init__(**kwargs)

    def check_range(self, value):
        if self.min_value is not None and value < self.min_value:
            self.error(f"{self.name} = {value!r} is below {self.min_value!r}")
        if self.max_value is not None and value > self.max_value:
            self.error(f"{self.name} = {value!r} is above {self.max_value!r}")


class IntegerField(_Bounded):
    """Integer key, e.g. a block size or a sample count."""

    def to_python(self, value):
        with contextlib.suppress(TypeError, ValueError):
            value = int(str(value).strip())
        return value

    def validate(self, value):
        if isinstance(value, bool) or not isinstance(value, int):
            self.error(f"{self.name} expects an integer, got {value!r}")
        self.check_range(value)


class SeedField(IntegerField):
    """Unsigned 64-bit seed."""

    def __init__(self, **kwargs):
        kwargs.setdefault("min_value", 0)
        kwargs.setdefault("max_value", 2**64 - 1)
        super().__init__(**kwargs)


class FloatField(_Bounded):
    """Finite real key; written back with ``repr`` so it reloads exactly."""

    def to_python(self, value):
        with contextlib.suppress(TypeError, ValueError):
            value = float(value.strip() if isinstance(value, str) else value)
        return value

    def to_text(self, value):
        return "" if value is None else repr(float(value))

    def validate(self, value):
        if not isinstance(value, float):
            self.error(f"{self.name} expects a number, got {value!r}")
        if not math.isfinite(value):
            self.error(f"{self.name} must be finite")
        self.check_range(value)


class BooleanField(BaseField):
    def to_python(self, value):
        if not isinstance(value, str):
            return bool(value)
        word = value.strip().lower()
        if word in _TRUE:
            return True
        if word in _FALSE:
            return False
        return value

    def to_text(self, value):
        return "true" if value else "false"

    def validate(self, value):
        if not isinstance(value, bool):
            self.error(f"{self.name} expects true or false, got {value!r}")


class StringField(BaseField):
    def __init__(self, min_length=None, max_length=None, **kwargs):
        self.min_length = min_length
        self.max_length = max_length
        super().__init__(**kwargs)

    def to_python(self, value):
        return value.strip() if isinstance(value, str) else value

    def validate(self, value):
        if not isinstance(value, str):
            self.error(f"{self.name} expects text, got {value!r}")
        if self.min_length is not None and len(value) < self.min_length:
            self.error(f"{self.name} needs at least {self.min_length} characters")
        if self.max_length is not None and len(value) > self.max_length:
            self.error(f"{self.name} allows at most {self.max_length} characters")


class ListField(BaseField):
    """Comma-separated values, each converted and checked by ``item``."""

    def __init__(self, item, min_length=None, **kwargs):
        self.item = item
        self.min_length = min_length
        kwargs.setdefault("default", list)
        super().__init__(**kwargs)

    def to_python(self, value):
        if isinstance(value, str):
            value = [part for part in value.split(",") if part.strip()]
        if isinstance(value, (list, tuple)):
            return [self.item.to_python(part) for part in value]
        return value

    def to_text(self, value):
        return ",".join(self.item.to_text(part) for part in value or [])

    def validate(self, value):
        if not isinstance(value, list):
            self.error(f"{self.name} expects comma-separated values")
        if self.min_length is not None and len(value) < self.min_length:
            self.error(f"{self.name} needs at least {self.min_length} values")
        self.item.name = self.name
        for part in value:
            self.item.validate(part)


class FloatListField(ListField):
    def __init__(self, min_value=None, max_value=None, **kwargs):
        super().__init__(FloatField(min_value=min_value, max_value=max_value), **kwargs)


class IntListField(ListField):
    def __init__(self, min_value=None, max_value=None, **kwargs):
        super().__init__(IntegerField(min_value=min_value, max_value=max_value), **kwargs)


class ChoiceField(StringField):
    """A string restricted to a fixed set of values."""

    def __init__(self, choices, **kwargs):
        super().__init__(choices=tuple(choices), **kwargs)
        if not self.choices:
            raise ValueError("ChoiceField needs at least one choice")
