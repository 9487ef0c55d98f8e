from copolymer.base.fields import BaseField


class ConfigMetaclass(type):
    """Metaclass for all configuration objects.

    Collects the :class:`BaseField` attributes of the class and of its bases
    into ``_fields`` and records their declaration order in
    ``_fields_ordered``.
    """

    def __new__(cls, name, bases, attrs):
        config_fields = {}
        for base in bases[::-1]:
            if hasattr(base, "_fields"):
                config_fields.update(base._fields)

        for attr_name, attr_value in attrs.items():
            if not isinstance(attr_value, BaseField):
                continue
            attr_value.name = attr_name
            config_fields[attr_name] = attr_value

        attrs["_fields"] = config_fields
        attrs["_fields_ordered"] = tuple(
            i[1]
            for i in sorted(
                (v.creation_counter, v.name) for v in config_fields.values()
            )
        )
        return super().__new__(cls, name, bases, attrs)
