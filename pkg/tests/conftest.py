from __future__ import annotations

import pytest

from goalact.backends import Rule, ScriptedBackend
from goalact.environment import Table, ToolEnvironment


@pytest.fixture
def company_env() -> ToolEnvironment:
    companies = Table(
        name="companies",
        key_field="name",
        rows=(
            {"name": "AlphaCorp", "city": "Port Meridell", "founded": "2019-04",
             "case_id": "CS-100"},
            {"name": "BetaWorks", "city": "Harrowgate", "founded": "2012-11",
             "case_id": "CS-200"},
        ),
    )
    cases = Table(
        name="cases",
        key_field="case_id",
        rows=(
            {"case_id": "CS-100", "status": "open", "amount": 1200},
            {"case_id": "CS-101", "status": "open", "amount": 800},
            {"case_id": "CS-200", "status": "closed", "amount": 50},
            {"case_id": "CS-201", "status": "open", "amount": 40},
        ),
    )
    return ToolEnvironment(tables=(companies, cases))


def scripted(*rules: Rule) -> ScriptedBackend:
    return ScriptedBackend(list(rules))
