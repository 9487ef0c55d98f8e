"""Named, process-wide tables shared by the solvers.

Interface tables are registered under an alias and looked up by the column
solver and the phase scan; entropy evaluators are created lazily from
registered settings, and an evaluator is shared between aliases whose
settings coincide.
"""
import logging

from copolymer.errors import NotRegistered, TableMissing

logger = logging.getLogger(__name__)

DEFAULT_ALIAS = "default"

_tables = {}
_evaluator_settings = {}
_evaluators = {}


def register_table(table, alias=DEFAULT_ALIAS, replace=False):
    """Register an interface table under ``alias``.

    :param table: an :class:`~copolymer.interface.InterfaceTable`
    :param alias: the name used to look the table up again
    :param replace: overwrite an existing registration instead of failing
    """
    if alias in _tables and not replace and _tables[alias] is not table:
        raise TableMissing(
            f"A different table with alias `{alias}` was already registered. "
            "Use drop_table() first"
        )
    _tables[alias] = table
    logger.debug("registered table %r", alias)
    return table


def get_table(alias=DEFAULT_ALIAS):
    """Return the interface table registered under ``alias``."""
    if alias not in _tables:
        if alias == DEFAULT_ALIAS:
            msg = "You have not built a default interface table"
        else:
            msg = f"Interface table with alias {alias} has not been built"
        raise TableMissing(msg)
    return _tables[alias]


def drop_table(alias=DEFAULT_ALIAS):
    _tables.pop(alias, None)


def register_evaluator(alias=DEFAULT_ALIAS, **settings):
    """Register the settings of an entropy evaluator (ladder, tol, cache)."""
    _evaluator_settings[alias] = dict(settings)
    _evaluators.pop(alias, None)


def get_evaluator(alias=DEFAULT_ALIAS):
    """Return the entropy evaluator for ``alias``, creating it on first use.

    The default alias needs no registration; other aliases do.
    """
    if alias in _evaluators:
        return _evaluators[alias]
    if alias not in _evaluator_settings:
        if alias != DEFAULT_ALIAS:
            raise NotRegistered(f"Entropy evaluator with alias {alias} has not been defined")
        _evaluator_settings[alias] = {}

    settings = _evaluator_settings[alias]
    evaluator = _find_existing_evaluator(settings)
    if evaluator is None:
        from copolymer.entropy import EntropyEvaluator

        evaluator = EntropyEvaluator(**settings)
    _evaluators[alias] = evaluator
    return evaluator


def _find_existing_evaluator(settings):
    for alias, other in _evaluator_settings.items():
        if other == settings and _evaluators.get(alias) is not None:
            return _evaluators[alias]
    return None


def drop_evaluator(alias=DEFAULT_ALIAS):
    _evaluators.pop(alias, None)
    _evaluator_settings.pop(alias, None)


def drop_all():
    """Forget every registered table and evaluator."""
    _tables.clear()
    _evaluators.clear()
    _evaluator_settings.clear()
