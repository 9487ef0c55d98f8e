import pytest

from copolymer import registry
from copolymer.config import model_params
from copolymer.errors import NotRegistered, TableMissing
from copolymer.interface import InterfaceTable


def test_register_and_get(entropic_table):
    registry.register_table(entropic_table)
    assert registry.get_table() is entropic_table
    # registering the same object again is harmless
    registry.register_table(entropic_table)


def test_conflicting_registration(entropic_table):
    registry.register_table(entropic_table, "run")
    other = InterfaceTable.entropic(model_params(1.0, 0.5))
    with pytest.raises(TableMissing):
        registry.register_table(other, "run")
    registry.register_table(other, "run", replace=True)
    assert registry.get_table("run") is other


def test_missing_tables():
    with pytest.raises(TableMissing):
        registry.get_table()
    with pytest.raises(TableMissing):
        registry.get_table("elsewhere")


def test_drop_table(entropic_table):
    registry.register_table(entropic_table)
    registry.drop_table()
    with pytest.raises(TableMissing):
        registry.get_table()


def test_default_evaluator_needs_no_registration():
    evaluator = registry.get_evaluator()
    assert registry.get_evaluator() is evaluator
    with pytest.raises(NotRegistered):
        registry.get_evaluator("coarse")


def test_reregistering_evaluator_replaces_it():
    registry.register_evaluator("x", ladder=(8, 16, 32))
    first = registry.get_evaluator("x")
    registry.register_evaluator("x", ladder=(8, 16, 32, 64))
    second = registry.get_evaluator("x")
    assert second is not first
    assert second.ladder == (8, 16, 32, 64)
    registry.drop_evaluator("x")
    with pytest.raises(NotRegistered):
        registry.get_evaluator("x")
