import collections.abc

from copolymer.errors import ValidationError


class BaseField:
    """One typed key of a run configuration.

    A field turns the raw text of a ``key = value`` line into a Python value
    (:meth:`to_python`), writes it back (:meth:`to_text`) and checks it
    (:meth:`validate`). Unset keys take ``default``, which may be a callable.
    """

    name = None  # assigned by ConfigMetaclass

    # declaration order across all fields
    creation_counter = 0

    def __init__(self, default=None, required=False, choices=None, help_text=""):
        """
        :param default: value used when the key is absent; a callable is
            called once per configuration
        :param required: reject configurations that leave the key unset
        :param choices: (optional) the admissible values
        :param help_text: one line shown next to the key in dumped configs
        """
        self.default = default
        self.required = required
        if isinstance(choices, collections.abc.Iterator):
            choices = list(choices)
        self.choices = choices
        self.help_text = help_text

        self.creation_counter = BaseField.creation_counter
        BaseField.creation_counter += 1

    def __get__(self, config, owner):
        if config is None:
            return self
        return config._data.get(self.name)

    def __set__(self, config, value):
        if value is None:
            value = self.get_default()
        config._data[self.name] = None if value is None else self.to_python(value)

    def get_default(self):
        return self.default() if callable(self.default) else self.default

    def error(self, message="", errors=None, field_name=None):
        raise ValidationError(message, errors=errors, field_name=field_name or self.name)

    def to_python(self, value):
        return value

    def to_text(self, value):
        if value is None:
            return ""
        return str(value)

    def validate(self, value):
        """Type and range checks; subclasses override."""

    def check(self, value):
        """Run the choice check, then :meth:`validate`."""
        if self.choices:
            items = value if isinstance(value, (list, tuple)) else (value,)
            rejected = [item for item in items if item not in self.choices]
            if rejected:
                allowed = ", ".join(str(choice) for choice in self.choices)
                self.error(f"{rejected[0]!r} is not one of {allowed}")
        self.validate(value)
